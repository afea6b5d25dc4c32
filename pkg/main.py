#!/usr/bin/env python3
"""
Stiff String Synthesizer

非线性刚性弦物理建模合成：
- 拨弦 / 弓弦 / 击弦激励
- 横向与纵向振动耦合的隐式有限差分格式
- 随机参数数据集生成
- 验收测试与性能基准
"""

import sys

from src.cli.app import main

if __name__ == "__main__":
    sys.exit(main())
