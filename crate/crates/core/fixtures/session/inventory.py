class Item:
    def __init__(self, name, qty):
        self.name = name
        self.qty = qty

    def is_empty(self):
        return self.qty == 0


class Inventory:
    def __init__(self):
        self.items = {}

    def add(self, name, qty):
        if qty <= 0:
            raise ValueError("qty must be positive")
        self.items[name] = Item(name, qty)

    def take(self, name, qty):
        if name not in self.items:
            return False
        item = self.items[name]
        if item.qty < qty:
            return False
        item.qty -= qty
        return True

    def restock_needed(self, name):
        item = self.items.get(name)
        if item is None or item.is_empty():
            return True
        return False


def audit(inv, name):
    return inv.restock_needed(name) or inv.take(name, 1)


def describe(qty):
    if qty > 100:
        return "bulk"
    return "single"
