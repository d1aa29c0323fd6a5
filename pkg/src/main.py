"""
IrisLeakAudit 命令行入口
子命令 synth / curate / extract / match / report / run-all
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .core.pipeline import AuditPipeline, EXIT_ERROR
from .models.config import RunConfig

STAGES = ("synth", "curate", "extract", "match", "report", "run-all")


def setup_logging(log_dir: str, verbose: bool = False):
    """设置日志记录：文件 + 标准输出"""
    path = Path(log_dir)
    path.mkdir(parents=True, exist_ok=True)

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(path / "audit.log", encoding='utf-8'),
            logging.StreamHandler(sys.stdout)
        ]
    )
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("PIL").setLevel(logging.WARNING)


def check_dependencies() -> bool:
    """检查依赖"""
    try:
        import numpy
        import scipy
        import PIL
        import matplotlib
        import chardet
    except ImportError as e:
        print(f"缺少必要的依赖: {e}")
        print("请运行: pip install -r requirements.txt")
        return False
    if not hasattr(numpy, "bitwise_count"):
        print(f"numpy 版本过低: {numpy.__version__}（需要 2.0 以上）")
        return False
    return True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="IrisLeakAudit",
        description="虹膜生成模型身份泄露审计工具",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        sub = subparsers.add_parser(stage)
        sub.add_argument("--config", help="用户配置文件（INI），覆盖默认配置")
        sub.add_argument("--workers", type=int, help="并行进程数")
        sub.add_argument("--seed", type=int, help="全局随机种子")
        sub.add_argument("--output", help="输出目录")
        sub.add_argument("--verbose", action="store_true", help="输出调试日志")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """主函数，返回退出码：0 无泄露，2 检测到泄露，1 出错"""
    args = build_parser().parse_args(argv)

    try:
        config = RunConfig(args.config)
    except (FileNotFoundError, ValueError) as e:
        print(f"错误: {e}")
        return EXIT_ERROR
    config.apply_overrides(workers=args.workers, seed=args.seed, output_dir=args.output)

    setup_logging(config.output_path("logs"), args.verbose)
    logger = logging.getLogger(__name__)
    logger.info(f"IrisLeakAudit v{__version__}: {args.command}")

    pipeline = AuditPipeline(config)
    handlers = {
        "synth": pipeline.synth,
        "curate": pipeline.curate,
        "extract": pipeline.extract,
        "match": pipeline.match,
        "report": pipeline.report,
        "run-all": pipeline.run_all,
    }
    try:
        result = handlers[args.command]()
    except Exception as e:
        logger.error(f"运行时出现错误: {e}", exc_info=True)
        return EXIT_ERROR

    if not result.success:
        print(f"错误: {result.message}")
    return result.exit_code


if __name__ == "__main__":
    if not check_dependencies():
        sys.exit(EXIT_ERROR)
    sys.exit(main())
