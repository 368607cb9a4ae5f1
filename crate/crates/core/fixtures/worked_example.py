class Array:
    def __init__(self, items=None):
        self.items = items


class Class1:
    """Registry of field definitions."""

    def __init__(self, definitions=None):
        self.definitions = definitions or {}

    def dependent_method0(self):
        return len(self.definitions) > 1

    def dependent_method1(self, field):
        return len(field.items)

    def method1(self, field):
        var0 = self.dependent_method1(field)
        if var0 > 0 and self.dependent_method0():
            return True
        return False

    def method2(self, field):
        return self.method1(field)


class Class2:
    def __init__(self, name):
        self.name = name

    def method3(self, items):
        obj = Class1({"a": 1, "b": 2})
        field = Array(items)
        obj.method2(field)
        return obj.method1(field)
