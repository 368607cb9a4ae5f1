import pytest

from inventory import Inventory


def test_add():
    inv = Inventory()
    inv.add("bolt", 3)
    assert inv.items["bolt"].qty == 3
    with pytest.raises(ValueError):
        inv.add("nut", 0)
