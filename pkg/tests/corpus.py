"""Malformed metric expressions and the 1-based column each diagnostic must point at."""

MALFORMED = [
    ("y1 + ", 6),
    ("", 1),
    ("sqrt(y1^2 + y2^2", 17),
    ("sqrt y1", 6),
    ("y1 ** 2", 5),
    ("(y1 + y2))", 10),
    ("y1 + * y2", 6),
    ("foo(y1)", 1),
    ("sqrt(y1, y2)", 8),
    ("pow(y1)", 7),
    ("pow(y1, 2, 3)", 10),
    ("y1^x1", 4),
    ("y1^(1/0)", 7),
    ("y9", 1),
    ("y1 $ y2", 4),
    ("exp()", 5),
    ("sqrt(y1^2 + y2^2) + c*y1", 21),
    ("y1^2^3", 5),
    ("2 y1", 3),
    ("y1 +\n  * y2", 3),
    ("sin(y1", 7),
    ("log", 4),
    ("(", 2),
    (")", 1),
    ("y0", 1),
]
