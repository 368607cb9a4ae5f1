from inventory import Inventory


def test_restock_not_needed():
    inv = Inventory()
    inv.add("bolt", 5)
    assert inv.restock_needed("bolt") is False
