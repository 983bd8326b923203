"""
Kähler Toolkit 入口点

允许通过 python -m kahler_toolkit 运行, 与 kahler 命令等价
"""


def main():
    """主入口函数"""
    from kahler_toolkit.cli import app

    app()


if __name__ == "__main__":
    main()
