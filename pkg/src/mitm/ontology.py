"""Well-known symbol addresses: the implicit builtin theory and the sorts and
constructors of the shipped core ontology that codecs target.
"""

from .terms import SymbolUri, Sym

# implicit builtin theory, included everywhere
BUILTIN = "builtin"

INT = SymbolUri(BUILTIN, BUILTIN, "int")
STR = SymbolUri(BUILTIN, BUILTIN, "str")
FLOAT = SymbolUri(BUILTIN, BUILTIN, "float")
BOOL = SymbolUri(BUILTIN, BUILTIN, "bool")
PROP = SymbolUri(BUILTIN, BUILTIN, "prop")
# wildcard sort: equal to any sort during checking (element sort of an empty
# list, coefficient slot of the polynomial constructor)
ANY = SymbolUri(BUILTIN, BUILTIN, "any")
# the sort of sorts, only used when a sort symbol appears in term position
SORT = SymbolUri(BUILTIN, BUILTIN, "sort")
# sort constructors and the tuple value constructor
LIST = SymbolUri(BUILTIN, BUILTIN, "list")
TUPLE = SymbolUri(BUILTIN, BUILTIN, "tuple")
TRUE = SymbolUri(BUILTIN, BUILTIN, "true")
FALSE = SymbolUri(BUILTIN, BUILTIN, "false")

INT_SORT = Sym(INT)
STR_SORT = Sym(STR)
FLOAT_SORT = Sym(FLOAT)
BOOL_SORT = Sym(BOOL)
PROP_SORT = Sym(PROP)
ANY_SORT = Sym(ANY)

# core ontology (shipped as the `mitm` fixture graph): sorts the builtin
# codecs target and the constructors their decode output uses
CORE_GRAPH = "mitm"

RATIONAL_SORT = SymbolUri(CORE_GRAPH, "field", "rational")
RATIONAL_CTOR = SymbolUri(CORE_GRAPH, "field", "rat")
POLY_SORT = SymbolUri(CORE_GRAPH, "poly", "polynomial")
POLY_CTOR = SymbolUri(CORE_GRAPH, "poly", "poly")
PERM_SORT = SymbolUri(CORE_GRAPH, "perms", "perm")
PERM_CTOR = SymbolUri(CORE_GRAPH, "perms", "perm_images")
GROUP_SORT = SymbolUri(CORE_GRAPH, "perms", "group")
SET_SORT = SymbolUri(CORE_GRAPH, "sets", "set")
CARD = SymbolUri(CORE_GRAPH, "card", "card")
PLUS = SymbolUri(CORE_GRAPH, "field", "plus")


def list_of(elem):
    """The sort of lists with the given element sort."""
    from .terms import Apply
    return Apply(Sym(LIST), (elem,))


def tuple_of(*elems):
    from .terms import Apply
    return Apply(Sym(TUPLE), tuple(elems))
