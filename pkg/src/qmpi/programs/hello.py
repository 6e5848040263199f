from ..runtime import register_program


def main(ctx):
    ctx.print(f"Hello, rank={ctx.rank} of {ctx.size} processes")


register_program("hello", main)
