"""
随机种子派生
全局种子按 (seed, 标签) 派生出各模块独立的种子
"""

import hashlib

import numpy as np


def derive_seed(seed: int, *labels) -> int:
    """由全局种子和标签派生64位种子"""
    text = ":".join([str(int(seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed: int, *labels) -> np.random.Generator:
    """创建派生种子对应的随机数生成器"""
    return np.random.default_rng(derive_seed(seed, *labels))
