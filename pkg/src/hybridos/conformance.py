"""Source-level checker for the inline conformance markers in :mod:`hybridos.assertions`.

``collect`` walks a package tree and lists every marker as a manifest line::

    KIND item [args...]

``check`` takes such a manifest and verifies each line against the code.
Python cannot reject these properties at import time, so the check runs as
part of the test suite and of ``hybridos conformance``; a failing line fails
the build.

The five kinds:

NotDuplicable
    No class in the type's base chain offers a duplication path (``clone``,
    ``copy``, ``duplicate``, pickling hooks that do anything but raise,
    attribute forwarding), and ``__copy__``/``__deepcopy__``/``__reduce_ex__``
    are defined somewhere in the chain and only raise.
FieldsPrivate
    Each field is underscore-named, declared by the type, has no property
    setter, and is never accessed as an attribute outside the defining module.
ComposedOf
    The type (or a base) annotates the field with the named inner type.
NoMutates
    The function body never assigns, augments, deletes or calls a mutating
    method on ``<anything>.<field>``, and never ``setattr``s it by name.
NoCalls
    The function body contains no direct call to any of the named functions
    (calls made by callees are not followed).
"""
from __future__ import annotations

import ast
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import UnknownItem

KINDS = {
    "not_duplicable": "NotDuplicable",
    "private_fields": "FieldsPrivate",
    "fields_type": "ComposedOf",
    "nomutates": "NoMutates",
    "nocalls": "NoCalls",
}
DUP_METHODS = {"clone", "copy", "duplicate", "dup", "__getattr__"}
DUP_HOOKS = ("__copy__", "__deepcopy__", "__reduce_ex__")
PICKLE_HOOKS = {"__reduce__", "__getstate__", "__getnewargs__", "__getnewargs_ex__"}
MUTATORS = {
    "append", "extend", "insert", "pop", "popleft", "appendleft", "remove", "clear", "update",
    "add", "discard", "setdefault", "popitem", "sort", "reverse", "__setitem__", "__delitem__",
    "__iadd__", "rotate",
}

PACKAGE_DIR = Path(__file__).resolve().parent
SHIPPED_MANIFEST = PACKAGE_DIR / "conformance.manifest"


@dataclass(frozen=True, order=True)
class Assertion:
    kind: str
    item: str
    args: tuple = ()
    file: str = field(default="", compare=False)
    line: int = field(default=0, compare=False)

    def text(self) -> str:
        return " ".join((self.kind, self.item, *self.args))

    def located(self) -> str:
        return f"{self.text()}  # {self.file}:{self.line}"

    @classmethod
    def parse(cls, line: str) -> "Assertion":
        parts = line.split("#", 1)[0].split()
        if len(parts) < 2 or parts[0] not in KINDS.values():
            raise ValueError(f"not an assertion line: {line!r}")
        return cls(parts[0], parts[1], tuple(parts[2:]))


@dataclass
class Result:
    assertion: Assertion
    ok: bool
    reason: str = ""

    def line(self) -> str:
        a = self.assertion
        status = "PASS" if self.ok else "FAIL"
        tail = f"  ({self.reason})" if self.reason else ""
        return f"{status} {a.text()}  # {a.file}:{a.line}{tail}"


@dataclass
class Report:
    results: list[Result]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def failures(self) -> list[Result]:
        return [r for r in self.results if not r.ok]

    def lines(self) -> list[str]:
        return [r.line() for r in self.results]

    def __str__(self):
        return "\n".join(self.lines())


# source model

@dataclass
class _Item:
    module: str
    file: str
    node: ast.AST
    cls: ast.ClassDef | None = None


class Codebase:
    """Parsed view of one package directory."""

    def __init__(self, root: str | Path = PACKAGE_DIR):
        self.root = Path(root)
        self.package = self.root.name
        self.modules: dict[str, tuple[str, ast.Module]] = {}
        for path in sorted(self.root.rglob("*.py")):
            rel = path.relative_to(self.root)
            name = ".".join((self.package, *rel.with_suffix("").parts))
            if name.endswith(".__init__"):
                name = name[: -len(".__init__")]
            self.modules[name] = (str(Path(self.package, rel)), ast.parse(path.read_text(), str(path)))
        self.items: dict[str, _Item] = {}
        self.classes: dict[str, list[str]] = {}
        for mod, (file, tree) in self.modules.items():
            for node in tree.body:
                self._index(mod, file, node, prefix=mod, cls=None)

    def _index(self, mod, file, node, prefix, cls):
        if isinstance(node, ast.ClassDef):
            qual = f"{prefix}.{node.name}"
            self.items[qual] = _Item(mod, file, node)
            self.classes.setdefault(node.name, []).append(qual)
            for child in node.body:
                self._index(mod, file, child, qual, node)
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            qual = f"{prefix}.{node.name}"
            # keep the first definition; property setters reuse the name
            self.items.setdefault(qual, _Item(mod, file, node, cls))

    def item(self, name: str) -> _Item:
        try:
            return self.items[name]
        except KeyError:
            raise UnknownItem(f"{name} does not exist in {self.package}") from None

    def chain(self, qual: str) -> list[_Item]:
        """The class and its package-local bases, depth first, without repeats."""
        out, seen, todo = [], set(), [qual]
        while todo:
            name = todo.pop(0)
            if name in seen:
                continue
            seen.add(name)
            item = self.items[name]
            out.append(item)
            for base in item.node.bases:
                simple = base.id if isinstance(base, ast.Name) else getattr(base, "attr", None)
                if isinstance(base, ast.Subscript):
                    simple = getattr(base.value, "id", None)
                candidates = self.classes.get(simple, [])
                local = [c for c in candidates if self.items[c].module == item.module]
                todo.extend(local or candidates[:1])
        return out


def _decorator_name(dec: ast.expr) -> str | None:
    target = dec.func if isinstance(dec, ast.Call) else dec
    if isinstance(target, ast.Name):
        return target.id
    if isinstance(target, ast.Attribute):
        return target.attr
    return None


def _decorator_args(dec: ast.expr) -> tuple:
    if not isinstance(dec, ast.Call):
        return ()
    return tuple(a.value for a in dec.args if isinstance(a, ast.Constant) and isinstance(a.value, str))


def collect(codebase: str | Path | Codebase = PACKAGE_DIR) -> list[Assertion]:
    """Every inline marker in the package, sorted and with locations."""
    cb = codebase if isinstance(codebase, Codebase) else Codebase(codebase)
    found = []
    for qual, item in cb.items.items():
        for dec in getattr(item.node, "decorator_list", []):
            name = _decorator_name(dec)
            if name not in KINDS:
                continue
            args = _decorator_args(dec)
            if name == "fields_type":
                found.append(Assertion(KINDS[name], qual, args, item.file, dec.lineno))
            elif name == "not_duplicable":
                found.append(Assertion(KINDS[name], qual, (), item.file, dec.lineno))
            else:
                found.append(Assertion(KINDS[name], qual, tuple(sorted(args)), item.file, dec.lineno))
    return sorted(found, key=lambda a: (a.kind, a.item, a.args))


def render(assertions, located: bool = False) -> str:
    lines = [a.located() if located else a.text() for a in assertions]
    return "".join(line + "\n" for line in lines)


def load_manifest(path: str | Path = SHIPPED_MANIFEST) -> list[Assertion]:
    out = []
    for raw in Path(path).read_text().splitlines():
        if raw.split("#", 1)[0].strip():
            out.append(Assertion.parse(raw))
    return out


# checks

def _raise_only(fn: ast.FunctionDef) -> bool:
    body = [s for s in fn.body if not (isinstance(s, ast.Expr) and isinstance(s.value, ast.Constant))]
    return bool(body) and all(isinstance(s, ast.Raise) for s in body)


def _methods(cls: ast.ClassDef) -> dict[str, ast.FunctionDef]:
    return {n.name: n for n in cls.body if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))}


def _check_not_duplicable(cb: Codebase, a: Assertion) -> str | None:
    chain = cb.chain(a.item)
    hooks = {}
    for item in chain:
        if any(_decorator_name(d) == "dataclass" for d in item.node.decorator_list):
            return f"{item.node.name} is a dataclass and can be rebuilt with dataclasses.replace"
        for name, fn in _methods(item.node).items():
            if name in DUP_METHODS:
                return f"{item.node.name}.{name} offers a duplication path"
            if name in PICKLE_HOOKS and not _raise_only(fn):
                return f"{item.node.name}.{name} lets the value be reconstructed"
            if name in DUP_HOOKS:
                hooks.setdefault(name, (item.node.name, fn))
    for name in DUP_HOOKS:
        if name not in hooks:
            return f"nothing in the base chain blocks {name}"
        owner, fn = hooks[name]
        if not _raise_only(fn):
            return f"{owner}.{name} does not just raise"
    return None


def _declared_fields(cb: Codebase, qual: str) -> set[str]:
    names = set()
    for item in cb.chain(qual):
        for node in ast.walk(item.node):
            if isinstance(node, ast.Assign) and any(getattr(t, "id", None) == "__slots__" for t in node.targets):
                if isinstance(node.value, (ast.Tuple, ast.List)):
                    names.update(e.value for e in node.value.elts if isinstance(e, ast.Constant))
            elif isinstance(node, ast.AnnAssign) and isinstance(node.target, ast.Name):
                names.add(node.target.id)
            elif isinstance(node, (ast.Assign, ast.AnnAssign)):
                targets = node.targets if isinstance(node, ast.Assign) else [node.target]
                for t in targets:
                    if isinstance(t, ast.Attribute) and getattr(t.value, "id", None) == "self":
                        names.add(t.attr)
    return names


def _check_fields_private(cb: Codebase, a: Assertion) -> str | None:
    item = cb.item(a.item)
    declared = _declared_fields(cb, a.item)
    for f in a.args:
        if not f.startswith("_"):
            return f"field {f} is public"
        if f not in declared:
            return f"field {f} is not declared by {item.node.name}"
    for klass in cb.chain(a.item):
        for fn in _methods(klass.node).values():
            for dec in fn.decorator_list:
                if isinstance(dec, ast.Attribute) and dec.attr in ("setter", "deleter") and fn.name in a.args:
                    return f"{klass.node.name}.{fn.name} has a {dec.attr}"
    for mod, (file, tree) in cb.modules.items():
        if mod == item.module:
            continue
        for node in ast.walk(tree):
            if isinstance(node, ast.Attribute) and node.attr in a.args:
                return f"{node.attr} accessed outside {item.module} at {file}:{node.lineno}"
            if (isinstance(node, ast.Call) and _decorator_name(node.func) in ("getattr", "setattr")
                    and len(node.args) >= 2 and isinstance(node.args[1], ast.Constant)
                    and node.args[1].value in a.args):
                return f"{node.args[1].value} reached by name outside {item.module} at {file}:{node.lineno}"
    return None


def _annotation_name(node: ast.expr) -> str:
    if isinstance(node, ast.Constant) and isinstance(node.value, str):
        return node.value
    return ast.unparse(node)


def _check_composed_of(cb: Codebase, a: Assertion) -> str | None:
    cb.item(a.item)
    if len(a.args) != 2:
        return "ComposedOf takes a field and an inner type"
    fld, inner = a.args
    for klass in cb.chain(a.item):
        for node in klass.node.body:
            if isinstance(node, ast.AnnAssign) and getattr(node.target, "id", None) == fld:
                got = _annotation_name(node.annotation)
                if got.split(".")[-1] == inner:
                    return None
                return f"{klass.node.name}.{fld} is annotated {got}, not {inner}"
    return f"no annotation for {fld} in {a.item} or its bases"


def _target_fields(target: ast.expr):
    if isinstance(target, (ast.Tuple, ast.List)):
        for e in target.elts:
            yield from _target_fields(e)
    elif isinstance(target, ast.Starred):
        yield from _target_fields(target.value)
    elif isinstance(target, ast.Attribute):
        yield target.attr
    elif isinstance(target, ast.Subscript):
        yield from _target_fields(target.value)


def _check_no_mutates(cb: Codebase, a: Assertion) -> str | None:
    fn = cb.item(a.item).node
    fields = set(a.args)
    for node in ast.walk(fn):
        targets = []
        if isinstance(node, ast.Assign):
            targets = node.targets
        elif isinstance(node, (ast.AugAssign, ast.AnnAssign)):
            targets = [node.target]
        elif isinstance(node, ast.Delete):
            targets = node.targets
        elif isinstance(node, (ast.For, ast.AsyncFor, ast.comprehension)):
            targets = [node.target]
        elif isinstance(node, ast.NamedExpr):
            targets = [node.target]
        for t in targets:
            for name in _target_fields(t):
                if name in fields:
                    return f"writes {name} at line {node.lineno}"
        if isinstance(node, ast.Call):
            func = node.func
            if (isinstance(func, ast.Attribute) and func.attr in MUTATORS
                    and isinstance(func.value, ast.Attribute) and func.value.attr in fields):
                return f"calls {func.value.attr}.{func.attr} at line {node.lineno}"
            if (_decorator_name(func) in ("setattr", "__setattr__", "delattr") and len(node.args) >= 2
                    and isinstance(node.args[1], ast.Constant) and node.args[1].value in fields):
                return f"sets {node.args[1].value} by name at line {node.lineno}"
    return None


def _check_no_calls(cb: Codebase, a: Assertion) -> str | None:
    fn = cb.item(a.item).node
    banned = set(a.args)
    for node in ast.walk(fn):
        if isinstance(node, ast.Call):
            name = _decorator_name(node.func)
            if name in banned:
                return f"calls {name} at line {node.lineno}"
    return None


CHECKS = {
    "NotDuplicable": _check_not_duplicable,
    "FieldsPrivate": _check_fields_private,
    "ComposedOf": _check_composed_of,
    "NoMutates": _check_no_mutates,
    "NoCalls": _check_no_calls,
}


def check(manifest, codebase: str | Path | Codebase = PACKAGE_DIR) -> Report:
    """Verify every assertion in ``manifest`` (a path or iterable of Assertions)."""
    cb = codebase if isinstance(codebase, Codebase) else Codebase(codebase)
    if isinstance(manifest, (str, Path)):
        manifest = load_manifest(manifest)
    located = {(a.kind, a.item, a.args): a for a in collect(cb)}
    results = []
    for a in manifest:
        item = cb.item(a.item)
        where = located.get((a.kind, a.item, a.args))
        a = Assertion(a.kind, a.item, a.args, where.file if where else item.file,
                      where.line if where else getattr(item.node, "lineno", 0))
        reason = CHECKS[a.kind](cb, a)
        results.append(Result(a, reason is None, reason or ""))
    return Report(results)


# mutation harness

@dataclass(frozen=True)
class Mutation:
    kind: str
    file: str
    old: str
    new: str
    description: str


MUTATIONS = {
    "NotDuplicable": Mutation(
        "NotDuplicable", "mem.py",
        "class FreePages(TypedPages):\n    __slots__ = ()\n",
        "class FreePages(TypedPages):\n    __slots__ = ()\n\n"
        "    def clone(self):\n        return type(self)(_KEY, self._chunk, self._mem)\n",
        "give the pages type a clone() method"),
    "FieldsPrivate": Mutation(
        "FieldsPrivate", "device_sim.py",
        "    # wiring\n",
        "    # wiring\n    def peek_range(self, chunk):\n        return chunk._range\n\n",
        "read Chunk._range from another module"),
    "ComposedOf": Mutation(
        "ComposedOf", "mem.py",
        "    _chunk: Chunk\n",
        "    _chunk: object\n",
        "declare the pages' inner field as something other than Chunk"),
    "NoMutates": Mutation(
        "NoMutates", "ixgbe_driver.py",
        "        proof = self._core.nic._regs.txdctl_disable(self._core.index)\n",
        "        proof = self._core.nic._regs.txdctl_disable(self._core.index)\n"
        "        self._core._next_index = 0\n",
        "an unverified driver function rewinds next_index"),
    "NoCalls": Mutation(
        "NoCalls", "nic_hal.py",
        "        self._consume()\n        return self._view\n",
        "        self._write(\"CTRL\", 0)\n        self._consume()\n        return self._view\n",
        "release() writes a register on the way out"),
}


def apply_mutation(kind: str, root: str | Path = PACKAGE_DIR, dest: str | Path | None = None) -> Path:
    """Copy the package to ``dest`` (a fresh temp dir by default) with one mutation applied."""
    m = MUTATIONS[kind]
    root = Path(root)
    base = Path(dest) if dest is not None else Path(tempfile.mkdtemp(prefix="mutant-"))
    target = base / root.name
    shutil.copytree(root, target, ignore=shutil.ignore_patterns("__pycache__"))
    path = target / m.file
    text = path.read_text()
    if text.count(m.old) != 1:
        raise RuntimeError(f"mutation {kind} no longer applies to {m.file}")
    path.write_text(text.replace(m.old, m.new))
    return target


def run_mutation(kind: str, manifest=SHIPPED_MANIFEST, root: str | Path = PACKAGE_DIR) -> Report:
    with tempfile.TemporaryDirectory(prefix="mutant-") as tmp:
        return check(manifest, apply_mutation(kind, root, tmp))


def killed(kind: str, report: Report) -> bool:
    """A mutation is killed when an assertion of its own kind fails."""
    return any(r.assertion.kind == kind for r in report.failures)
