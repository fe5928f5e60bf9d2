#!/usr/bin/env python3
"""Tiny evaluator for a restricted Java subset, driving the zk-colon-loop
fixture without a JVM.

It extracts one static method from a .java file and interprets it over
string inputs. Supported statements: int declarations, assignments,
if/else, while, break/continue, return, i++/i--. Supported expressions:
int/char/string/bool/null literals, ||, &&, ==, !=, <, <=, >, >=, + and -,
unary ! and -, assignment-in-expression, and the String methods indexOf,
charAt, length, isEmpty, equals, startsWith, substring.

Sub-commands:
  check <file> --method NAME            parse whole file + target method
  pov   <file> --method NAME --blob F   run crash inputs; loop/exception => crash
  test  <file> --method NAME --cases F  run functional cases (input<TAB>expected)
"""

import argparse
import re
import sys

MAX_STEPS_DEFAULT = 100000


class MiniJavaError(Exception):
    pass


class StepLimitExceeded(Exception):
    pass


# --- lexer -------------------------------------------------------------------

TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*|/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<char>'(?:\\.|[^'\\])')
  | (?P<str>"(?:\\.|[^"\\])*")
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op>\+\+|--|==|!=|<=|>=|&&|\|\||[=<>+\-*/%!(){};,.])
    """,
    re.VERBOSE | re.DOTALL,
)


def tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if not m:
            raise MiniJavaError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        tokens.append((m.lastgroup, m.group()))
    tokens.append(("eof", ""))
    return tokens


# --- parser ------------------------------------------------------------------

class Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text = self.next()
        if text != value:
            raise MiniJavaError(f"expected {value!r}, found {text!r}")

    def accept(self, value):
        if self.peek()[1] == value:
            self.next()
            return True
        return False

    def parse_block(self):
        self.expect("{")
        stmts = []
        while self.peek()[1] != "}":
            if self.peek()[0] == "eof":
                raise MiniJavaError("unexpected end of method body")
            stmts.append(self.parse_stmt())
        self.expect("}")
        return ("block", stmts)

    def parse_stmt_or_block(self):
        if self.peek()[1] == "{":
            return self.parse_block()
        return self.parse_stmt()

    def parse_stmt(self):
        kind, text = self.peek()
        if text in ("int", "long", "boolean"):
            self.next()
            _, name = self.next()
            init = None
            if self.accept("="):
                init = self.parse_expr()
            self.expect(";")
            return ("decl", name, init)
        if text == "return":
            self.next()
            value = None if self.peek()[1] == ";" else self.parse_expr()
            self.expect(";")
            return ("return", value)
        if text == "if":
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self.parse_stmt_or_block()
            other = self.parse_stmt_or_block() if self.accept("else") else None
            return ("if", cond, then, other)
        if text == "while":
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            body = self.parse_stmt_or_block()
            return ("while", cond, body)
        if text == "break":
            self.next()
            self.expect(";")
            return ("break",)
        if text == "continue":
            self.next()
            self.expect(";")
            return ("continue",)
        expr = self.parse_expr()
        self.expect(";")
        return ("expr", expr)

    def parse_expr(self):
        return self.parse_assign()

    def parse_assign(self):
        left = self.parse_or()
        if self.peek()[1] == "=":
            if left[0] != "var":
                raise MiniJavaError("left side of assignment must be a variable")
            self.next()
            return ("assign", left[1], self.parse_assign())
        return left

    def _binary(self, sub, ops):
        node = sub()
        while self.peek()[1] in ops:
            op = self.next()[1]
            node = ("bin", op, node, sub())
        return node

    def parse_or(self):
        return self._binary(self.parse_and, ("||",))

    def parse_and(self):
        return self._binary(self.parse_equality, ("&&",))

    def parse_equality(self):
        return self._binary(self.parse_relational, ("==", "!="))

    def parse_relational(self):
        return self._binary(self.parse_additive, ("<", "<=", ">", ">="))

    def parse_additive(self):
        return self._binary(self.parse_multiplicative, ("+", "-"))

    def parse_multiplicative(self):
        return self._binary(self.parse_unary, ("*", "/", "%"))

    def parse_unary(self):
        if self.peek()[1] in ("!", "-"):
            op = self.next()[1]
            return ("unary", op, self.parse_unary())
        if self.peek()[1] in ("++", "--"):
            op = self.next()[1]
            kind, name = self.next()
            if kind != "ident":
                raise MiniJavaError("++/-- requires a variable")
            return ("incdec", op, name, True)
        return self.parse_postfix()

    def parse_postfix(self):
        node = self.parse_primary()
        while True:
            if self.peek()[1] == ".":
                self.next()
                _, method = self.next()
                self.expect("(")
                args = []
                if self.peek()[1] != ")":
                    args.append(self.parse_expr())
                    while self.accept(","):
                        args.append(self.parse_expr())
                self.expect(")")
                node = ("call", node, method, args)
            elif self.peek()[1] in ("++", "--") and node[0] == "var":
                op = self.next()[1]
                node = ("incdec", op, node[1], False)
            else:
                return node

    def parse_primary(self):
        kind, text = self.next()
        if kind == "num":
            return ("num", int(text))
        if kind == "char":
            body = text[1:-1]
            return ("strlit", body.encode().decode("unicode_escape"))
        if kind == "str":
            return ("strlit", text[1:-1].encode().decode("unicode_escape"))
        if kind == "ident":
            if text == "null":
                return ("null",)
            if text == "true":
                return ("bool", True)
            if text == "false":
                return ("bool", False)
            return ("var", text)
        if text == "(":
            inner = self.parse_expr()
            self.expect(")")
            return inner
        raise MiniJavaError(f"unexpected token {text!r}")


# --- evaluator ---------------------------------------------------------------

class ReturnValue(Exception):
    def __init__(self, value):
        self.value = value


class BreakLoop(Exception):
    pass


class ContinueLoop(Exception):
    pass


class Evaluator:
    def __init__(self, max_steps):
        self.max_steps = max_steps
        self.steps = 0

    def tick(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepLimitExceeded()

    def run(self, body, env):
        try:
            self.exec_stmt(body, env)
        except ReturnValue as r:
            return r.value
        return None

    def exec_stmt(self, node, env):
        self.tick()
        tag = node[0]
        if tag == "block":
            for stmt in node[1]:
                self.exec_stmt(stmt, env)
        elif tag == "decl":
            env[node[1]] = self.eval(node[2], env) if node[2] is not None else 0
        elif tag == "return":
            raise ReturnValue(self.eval(node[1], env) if node[1] is not None else None)
        elif tag == "if":
            if self.truthy(self.eval(node[1], env)):
                self.exec_stmt(node[2], env)
            elif node[3] is not None:
                self.exec_stmt(node[3], env)
        elif tag == "while":
            while True:
                self.tick()
                if not self.truthy(self.eval(node[1], env)):
                    break
                try:
                    self.exec_stmt(node[2], env)
                except BreakLoop:
                    break
                except ContinueLoop:
                    continue
        elif tag == "break":
            raise BreakLoop()
        elif tag == "continue":
            raise ContinueLoop()
        elif tag == "expr":
            self.eval(node[1], env)
        else:
            raise MiniJavaError(f"unknown statement {tag}")

    @staticmethod
    def truthy(value):
        if isinstance(value, bool):
            return value
        raise MiniJavaError("condition is not boolean")

    def eval(self, node, env):
        self.tick()
        tag = node[0]
        if tag == "num":
            return node[1]
        if tag == "strlit":
            return node[1]
        if tag == "bool":
            return node[1]
        if tag == "null":
            return None
        if tag == "var":
            if node[1] not in env:
                raise MiniJavaError(f"unknown variable {node[1]}")
            return env[node[1]]
        if tag == "assign":
            value = self.eval(node[2], env)
            env[node[1]] = value
            return value
        if tag == "incdec":
            old = env.get(node[2])
            if not isinstance(old, int):
                raise MiniJavaError("++/-- requires an int variable")
            env[node[2]] = old + (1 if node[1] == "++" else -1)
            return env[node[2]] if node[3] else old
        if tag == "unary":
            value = self.eval(node[2], env)
            return (not value) if node[1] == "!" else -value
        if tag == "bin":
            return self.eval_bin(node, env)
        if tag == "call":
            return self.eval_call(node, env)
        raise MiniJavaError(f"unknown expression {tag}")

    def eval_bin(self, node, env):
        op = node[1]
        if op == "&&":
            return self.truthy(self.eval(node[2], env)) and self.truthy(self.eval(node[3], env))
        if op == "||":
            return self.truthy(self.eval(node[2], env)) or self.truthy(self.eval(node[3], env))
        left = self.eval(node[2], env)
        right = self.eval(node[3], env)
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
        if op == "+":
            if isinstance(left, str) or isinstance(right, str):
                return self.to_java_string(left) + self.to_java_string(right)
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right == 0:
                raise MiniJavaError("ArithmeticException: / by zero")
            return int(left / right)
        if op == "%":
            if right == 0:
                raise MiniJavaError("ArithmeticException: / by zero")
            return left - int(left / right) * right
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        if op == ">=":
            return left >= right
        raise MiniJavaError(f"unknown operator {op}")

    @staticmethod
    def to_java_string(value):
        if value is None:
            return "null"
        if isinstance(value, bool):
            return "true" if value else "false"
        return str(value)

    def eval_call(self, node, env):
        target = self.eval(node[1], env)
        method = node[2]
        args = [self.eval(a, env) for a in node[3]]
        if target is None:
            raise MiniJavaError(f"NullPointerException: call to {method} on null")
        if not isinstance(target, str):
            raise MiniJavaError(f"unsupported receiver for {method}")
        if method == "indexOf":
            needle = args[0]
            start = args[1] if len(args) > 1 else 0
            return target.find(needle, max(0, start))
        if method == "charAt":
            idx = args[0]
            if idx < 0 or idx >= len(target):
                raise MiniJavaError(f"StringIndexOutOfBoundsException: index {idx}")
            return target[idx]
        if method == "length":
            return len(target)
        if method == "isEmpty":
            return len(target) == 0
        if method == "equals":
            return target == args[0]
        if method == "startsWith":
            return target.startswith(args[0])
        if method == "substring":
            begin = args[0]
            end = args[1] if len(args) > 1 else len(target)
            if begin < 0 or end > len(target) or begin > end:
                raise MiniJavaError(f"StringIndexOutOfBoundsException: begin {begin}, end {end}")
            return target[begin:end]
        raise MiniJavaError(f"unsupported String method {method}")


# --- method extraction --------------------------------------------------------

def check_brace_balance(text):
    evaluator_state = "code"
    depth = 0
    i = 0
    while i < len(text):
        c = text[i]
        nxt = text[i + 1] if i + 1 < len(text) else ""
        if evaluator_state == "code":
            if c == "/" and nxt == "/":
                evaluator_state = "line"
            elif c == "/" and nxt == "*":
                evaluator_state = "block"
                i += 1
            elif c == '"':
                evaluator_state = "str"
            elif c == "'":
                evaluator_state = "chr"
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth < 0:
                    raise MiniJavaError("unbalanced '}'")
        elif evaluator_state == "line":
            if c == "\n":
                evaluator_state = "code"
        elif evaluator_state == "block":
            if c == "*" and nxt == "/":
                evaluator_state = "code"
                i += 1
        elif evaluator_state == "str":
            if c == "\\":
                i += 1
            elif c == '"':
                evaluator_state = "code"
        elif evaluator_state == "chr":
            if c == "\\":
                i += 1
            elif c == "'":
                evaluator_state = "code"
        i += 1
    if depth != 0:
        raise MiniJavaError(f"unbalanced braces: depth {depth} at end of file")


def extract_method(text, name):
    sig_re = re.compile(
        r"^[ \t]*(?:(?:public|private|protected|static|final|synchronized)\s+)+[\w<>\[\]]+\s+"
        + re.escape(name)
        + r"\s*\(([^)]*)\)",
        re.MULTILINE,
    )
    m = sig_re.search(text)
    if not m:
        raise MiniJavaError(f"method {name} not found")
    params = [p.strip() for p in m.group(1).split(",") if p.strip()]
    if len(params) != 1 or not params[0].startswith("String"):
        raise MiniJavaError(f"method {name} must take a single String parameter")
    param_name = params[0].split()[-1]

    brace = text.find("{", m.end())
    if brace < 0:
        raise MiniJavaError(f"method {name} has no body")
    # Balance to the closing brace (method bodies in the subset contain no
    # comments or braces inside literals that matter here, but track anyway).
    depth = 0
    i = brace
    while i < len(text):
        c = text[i]
        if c == "'" or c == '"':
            quote = c
            i += 1
            while i < len(text) and text[i] != quote:
                if text[i] == "\\":
                    i += 1
                i += 1
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                body = text[brace : i + 1]
                return param_name, body
        i += 1
    raise MiniJavaError(f"method {name} body is not brace-balanced")


def load_method(path, name):
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        text = f.read()
    check_brace_balance(text)
    param_name, body = extract_method(text, name)
    ast = Parser(tokenize(body)).parse_block()
    return param_name, ast


def run_method(param_name, ast, value, max_steps):
    evaluator = Evaluator(max_steps)
    return evaluator.run(ast, {param_name: value})


# --- sub-commands ---------------------------------------------------------------

def decode_input(raw):
    return raw.encode().decode("unicode_escape")


def cmd_check(args):
    try:
        load_method(args.file, args.method)
    except MiniJavaError as e:
        print(f"BUILD FAILED: {e}")
        return 1
    print("BUILD OK")
    return 0


def cmd_pov(args):
    try:
        param_name, ast = load_method(args.file, args.method)
    except MiniJavaError as e:
        print(f"BUILD FAILED: {e}")
        return 1
    with open(args.blob, "r", encoding="utf-8") as f:
        inputs = [decode_input(line.rstrip("\n")) for line in f if line.strip()]
    for value in inputs:
        try:
            result = run_method(param_name, ast, value, args.max_steps)
            print(f"input {value!r} -> {result}")
        except StepLimitExceeded:
            print(
                f"FuzzerSecurityIssue: potential infinite loop (timeout after "
                f"{args.max_steps} steps) in {args.method}, input {value!r}"
            )
            return 1
        except MiniJavaError as e:
            print(f"== Java Exception: java.lang.RuntimeException: {e}")
            return 1
    print("PoV did not reproduce")
    return 0


def cmd_test(args):
    try:
        param_name, ast = load_method(args.file, args.method)
    except MiniJavaError as e:
        print(f"BUILD FAILED: {e}")
        return 1
    failures = 0
    with open(args.cases, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            raw_input, expected = line.split("\t")
            value = decode_input(raw_input)
            try:
                result = run_method(param_name, ast, value, args.max_steps)
            except StepLimitExceeded:
                print(f"FAIL {value!r}: timeout")
                failures += 1
                continue
            except MiniJavaError as e:
                print(f"FAIL {value!r}: {e}")
                failures += 1
                continue
            if str(result) != expected:
                print(f"FAIL {value!r}: expected {expected}, got {result}")
                failures += 1
            else:
                print(f"ok   {value!r} -> {result}")
    if failures:
        print(f"{failures} functional test(s) failed")
        return 1
    print("all functional tests passed")
    return 0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("check", cmd_check), ("pov", cmd_pov), ("test", cmd_test)):
        p = sub.add_parser(name)
        p.add_argument("file")
        p.add_argument("--method", required=True)
        p.add_argument("--max-steps", type=int, default=MAX_STEPS_DEFAULT)
        if name == "pov":
            p.add_argument("--blob", required=True)
        if name == "test":
            p.add_argument("--cases", required=True)
        p.set_defaults(fn=fn)
    args = parser.parse_args()
    sys.exit(args.fn(args))


if __name__ == "__main__":
    main()
