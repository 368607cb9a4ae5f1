class Parser:
    def __init__(self, prefix: str = ""):
        self.prefix = prefix

    def is_magic(self, name: str) -> bool:
        name = name.split('.')[-1]
        return name[:2] == '__' and name[-2:] == '__'

    def is_public_family(self, name: str) -> bool:
        for s in name.split('.'):
            if self.is_magic(s):
                continue
            if s.startswith('_'):
                return False
        return True


def is_magic(s):
    return s.startswith('__') and s.endswith('__')


def check(s):
    if is_magic(s):
        return "magic"
    return "plain"
