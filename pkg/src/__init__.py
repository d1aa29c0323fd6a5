"""
IrisLeakAudit - 虹膜生成模型身份泄露审计工具
"""

__version__ = "1.0.0"
