class Class1:
    def method1(self, field):
        if isinstance(field.items, (tuple, list)):
            return len(field.items)
        return 0

    def method2(self, field):
        return self.method1(field)


class Class2:
    def method3(self, items):
        obj = Class1()
        obj.method2(items)
        return obj.method1(items)
