"""
测试模块
"""