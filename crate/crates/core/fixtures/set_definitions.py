import typing


class Field:
    def __init__(self, title: str = ""):
        self.title = title


class Array(Field):
    def __init__(self, items: typing.Union[Field, typing.Sequence[Field]] = None, min_items: int = None):
        super().__init__()
        self.items = items
        self.min_items = min_items


class Reference(Field):
    def __init__(self, to: str, definitions=None):
        super().__init__()
        self.to = to
        self.definitions = definitions


class SchemaDefinitions:
    def __init__(self):
        self._definitions = {}


def set_definitions(field: Field, definitions: SchemaDefinitions) -> None:
    if isinstance(field, Array) and field.items is not None:
        if isinstance(field.items, (tuple, list)):
            for child in field.items:
                set_definitions(child, definitions)
        else:
            set_definitions(field.items, definitions)
    elif isinstance(field, Reference):
        field.definitions = definitions


def clamp(x: int, limit: int) -> int:
    if x > limit:
        return limit
    return x
