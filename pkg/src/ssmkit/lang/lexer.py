"""Tokenizer for model files.

Newlines are significant as statement separators at bracket depth zero;
inside parentheses or square brackets they are discarded so expressions
and argument lists can span lines. `//` line comments and `/* .. */`
(including `/** .. */`) block comments are skipped anywhere.
"""

from dataclasses import dataclass

from ..errors import ModelSyntaxError

KEYWORDS = frozenset(
    ["model", "dim", "const", "param", "input", "noise", "state", "obs", "sub", "ode"]
)

SYMBOLS = ("<-", "{", "}", "(", ")", "[", "]", ",", ";", "~", "=", "+", "-", "*", "/")


@dataclass
class Token:
    kind: str  # IDENT NUMBER STRING NEWLINE EOF or the symbol itself
    value: object
    line: int
    column: int

    def __str__(self):
        if self.kind in ("IDENT", "NUMBER", "STRING"):
            return f"{self.value!r}"
        if self.kind == "NEWLINE":
            return "end of line"
        if self.kind == "EOF":
            return "end of input"
        return f"'{self.kind}'"


def _is_ident_start(c):
    return c.isalpha() or c == "_"


def _is_ident_char(c):
    return c.isalnum() or c == "_"


def tokenize(source):
    """Turn source text into a token list ending with EOF.

    Raises ModelSyntaxError on unexpected characters or unterminated
    comments/strings; never raises anything else for arbitrary input.
    """
    tokens = []
    i = 0
    line = 1
    col = 1
    depth = 0  # () and [] nesting; newlines inside are insignificant
    n = len(source)

    def err(msg):
        raise ModelSyntaxError(msg, line=line, column=col)

    while i < n:
        c = source[i]
        if c == "\n":
            if depth == 0 and tokens and tokens[-1].kind != "NEWLINE":
                tokens.append(Token("NEWLINE", None, line, col))
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end < 0:
                err("unterminated block comment")
            skipped = source[i : end + 2]
            line += skipped.count("\n")
            col = len(skipped) - skipped.rfind("\n") if "\n" in skipped else col + len(skipped)
            i = end + 2
            continue
        if c in "'\"":
            quote = c
            j = i + 1
            while j < n and source[j] != quote:
                if source[j] == "\n":
                    err("unterminated string literal")
                j += 1
            if j >= n:
                err("unterminated string literal")
            tokens.append(Token("STRING", source[i + 1 : j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and not source.startswith("..", j):
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            value = float(text) if is_float else int(text)
            tokens.append(Token("NUMBER", value, line, col))
            col += j - i
            i = j
            continue
        if _is_ident_start(c):
            j = i
            while j < n and _is_ident_char(source[j]):
                j += 1
            tokens.append(Token("IDENT", source[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, i):
                if sym in "([":
                    depth += 1
                elif sym in ")]":
                    depth = max(0, depth - 1)
                tokens.append(Token(sym, None, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            err(f"unexpected character {c!r}")

    tokens.append(Token("EOF", None, line, col))
    return tokens
