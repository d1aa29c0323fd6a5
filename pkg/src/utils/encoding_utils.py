"""
文本编码工具类
读取配置和清单等文本文件时自动检测编码
"""

import chardet
from typing import Optional, Tuple

from .errors import IrisAuditError


class EncodingUtils:
    """编码工具类"""

    COMMON_ENCODINGS = ['utf-8', 'gbk', 'cp932', 'latin-1']

    @staticmethod
    def detect_encoding(file_path: str) -> Optional[str]:
        """自动检测文件编码"""
        try:
            with open(file_path, 'rb') as f:
                raw_data = f.read()
        except OSError:
            return None

        if not raw_data:
            return 'utf-8'

        # 纯UTF-8文件直接返回，避免chardet把ASCII判成其他编码
        try:
            raw_data.decode('utf-8')
            return 'utf-8'
        except UnicodeDecodeError:
            pass

        result = chardet.detect(raw_data)
        if result and result.get('encoding') and result.get('confidence', 0) > 0.7:
            return result['encoding']

        for encoding in EncodingUtils.COMMON_ENCODINGS:
            try:
                raw_data.decode(encoding)
                return encoding
            except UnicodeDecodeError:
                continue
        return None

    @staticmethod
    def read_file_with_encoding(file_path: str, encoding: Optional[str] = None) -> Tuple[str, str]:
        """读取文件内容，自动处理编码

        Returns:
            Tuple[str, str]: (文件内容, 使用的编码)
        """
        if encoding is None:
            encoding = EncodingUtils.detect_encoding(file_path) or 'utf-8'

        try:
            with open(file_path, 'r', encoding=encoding, errors='replace') as f:
                return f.read(), encoding
        except LookupError:
            with open(file_path, 'r', encoding='utf-8', errors='replace') as f:
                return f.read(), 'utf-8'
        except OSError as e:
            raise IrisAuditError(f"无法读取文件 {file_path}: {e}")

    @staticmethod
    def write_file_with_encoding(file_path: str, content: str, encoding: str = 'utf-8'):
        """使用指定编码写入文件（统一使用\\n换行）"""
        try:
            with open(file_path, 'w', encoding=encoding, newline='\n') as f:
                f.write(content)
        except OSError as e:
            raise IrisAuditError(f"无法写入文件 {file_path}: {e}")
