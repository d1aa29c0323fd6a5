"""
文件操作工具类
封装阶段产物目录与JSON文件的读写
"""

import json
import os
import shutil
from typing import Any, List

from ..utils.encoding_utils import EncodingUtils
from ..utils.errors import IrisAuditError


class FileOperations:
    """文件操作工具类"""

    @staticmethod
    def ensure_dir_exists(dir_path: str) -> str:
        """确保目录存在，如果不存在则创建"""
        try:
            os.makedirs(dir_path, exist_ok=True)
            return dir_path
        except OSError as e:
            raise IrisAuditError(f"创建目录失败 {dir_path}: {e}")

    @staticmethod
    def reset_directory(dir_path: str) -> str:
        """清空并重建目录，保证重复运行不会残留旧产物"""
        try:
            if os.path.isdir(dir_path):
                shutil.rmtree(dir_path)
            os.makedirs(dir_path)
            return dir_path
        except OSError as e:
            raise IrisAuditError(f"重建目录失败 {dir_path}: {e}")

    @staticmethod
    def list_files(directory: str, extension: str = "") -> List[str]:
        """列出目录下（不递归）指定扩展名的文件，按文件名排序"""
        if not os.path.isdir(directory):
            return []
        names = sorted(n for n in os.listdir(directory)
                       if n.endswith(extension) and os.path.isfile(os.path.join(directory, n)))
        return [os.path.join(directory, n) for n in names]

    @staticmethod
    def list_directories(directory: str, prefix: str = "") -> List[str]:
        """列出目录下以 prefix 开头的子目录，按名称排序"""
        if not os.path.isdir(directory):
            return []
        names = sorted(n for n in os.listdir(directory)
                       if n.startswith(prefix) and os.path.isdir(os.path.join(directory, n)))
        return [os.path.join(directory, n) for n in names]


class JSONFileOperations:
    """JSON文件操作类"""

    @staticmethod
    def read_json(file_path: str) -> Any:
        """读取JSON文件（自动识别编码）"""
        try:
            content, _ = EncodingUtils.read_file_with_encoding(file_path)
            return json.loads(content)
        except json.JSONDecodeError as e:
            raise IrisAuditError(f"JSON格式错误 {file_path}: {e}")
        except OSError as e:
            raise IrisAuditError(f"读取JSON文件失败 {file_path}: {e}")

    @staticmethod
    def write_json(file_path: str, data: Any, indent: int = 2, create_dirs: bool = True):
        """写入JSON文件，键排序以保证输出可复现"""
        if create_dirs:
            dir_path = os.path.dirname(file_path)
            if dir_path:
                FileOperations.ensure_dir_exists(dir_path)
        content = json.dumps(data, ensure_ascii=False, indent=indent, sort_keys=True) + "\n"
        try:
            EncodingUtils.write_file_with_encoding(file_path, content)
        except OSError as e:
            raise IrisAuditError(f"写入JSON文件失败 {file_path}: {e}")
