"""
IrisLeakAudit 启动脚本
"""

import sys
from pathlib import Path

# 添加项目根目录到Python路径
sys.path.insert(0, str(Path(__file__).parent))

try:
    from src.main import main, check_dependencies
except ImportError as e:
    print(f"导入模块失败: {e}")
    print("请确保所有依赖都已正确安装")
    sys.exit(1)


if __name__ == "__main__":
    if not check_dependencies():
        sys.exit(1)
    sys.exit(main())
