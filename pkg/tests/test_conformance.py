import textwrap

import pytest

from hybridos import conformance as cf
from hybridos.conformance import Assertion, Codebase
from hybridos.errors import UnknownItem

BASE = '''
class Base:
    __slots__ = ("_live",)

    def __copy__(self):
        raise TypeError("no")

    def __deepcopy__(self, memo):
        raise TypeError("no")

    def __reduce_ex__(self, proto):
        raise TypeError("no")
'''


def make_pkg(tmp_path, **modules):
    root = tmp_path / "toy"
    root.mkdir()
    (root / "__init__.py").write_text("")
    (root / "base.py").write_text(BASE)
    for name, src in modules.items():
        (root / f"{name}.py").write_text(textwrap.dedent(src))
    return Codebase(root)


def verdict(cb, line):
    return cf.check([Assertion.parse(line)], cb).results[0]


# the shipped manifest

def test_shipped_manifest_passes():
    report = cf.check(cf.SHIPPED_MANIFEST)
    assert report.ok, "\n".join(r.line() for r in report.failures)
    assert len(report.results) >= 20
    assert {r.assertion.kind for r in report.results} == set(cf.KINDS.values())


def test_manifest_matches_inline_markers():
    assert cf.load_manifest() == cf.collect()


def test_report_stable_across_runs():
    assert str(cf.check(cf.SHIPPED_MANIFEST)) == str(cf.check(cf.SHIPPED_MANIFEST))


def test_one_line_per_assertion():
    manifest = cf.load_manifest()
    assert len(cf.check(manifest).lines()) == len(manifest)


def test_empty_manifest_empty_report(tmp_path):
    empty = tmp_path / "empty.manifest"
    empty.write_text("# nothing\n\n")
    report = cf.check(empty)
    assert report.results == [] and report.ok


def test_unknown_item():
    with pytest.raises(UnknownItem):
        cf.check([Assertion("NotDuplicable", "hybridos.mem.NoSuchType")])


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        Assertion.parse("Frobnicate hybridos.mem.FreePages")
    a = Assertion.parse("NoCalls hybridos.x.f g h  # trailing comment")
    assert a.args == ("g", "h")


@pytest.mark.parametrize("kind", sorted(cf.MUTATIONS))
def test_each_mutation_is_killed(kind):
    report = cf.run_mutation(kind)
    assert cf.killed(kind, report)
    # only its own kind breaks
    assert {r.assertion.kind for r in report.failures} == {kind}


# checkers on a toy package

def test_not_duplicable(tmp_path):
    cb = make_pkg(tmp_path, m='''
        from .base import Base

        class Good(Base):
            pass

        class Cloneable(Base):
            def clone(self):
                return self

        class Pickly(Base):
            def __getstate__(self):
                return {}

        class Bare:
            pass
        ''')
    assert verdict(cb, "NotDuplicable toy.m.Good").ok
    assert "clone" in verdict(cb, "NotDuplicable toy.m.Cloneable").reason
    assert not verdict(cb, "NotDuplicable toy.m.Pickly").ok
    assert not verdict(cb, "NotDuplicable toy.m.Bare").ok


def test_fields_private(tmp_path):
    cb = make_pkg(tmp_path, m='''
        class Box:
            __slots__ = ("_v", "pub")

            @property
            def v(self):
                return self._v

        class Settable:
            __slots__ = ("_w",)

            @property
            def _w(self):
                return 1

            @_w.setter
            def _w(self, x):
                pass
        ''', other='''
        def peek(box):
            return getattr(box, "_v")
        ''')
    assert "reached by name" in verdict(cb, "FieldsPrivate toy.m.Box _v").reason
    assert "public" in verdict(cb, "FieldsPrivate toy.m.Box pub").reason
    assert "not declared" in verdict(cb, "FieldsPrivate toy.m.Box _nope").reason
    assert "setter" in verdict(cb, "FieldsPrivate toy.m.Settable _w").reason


def test_fields_private_clean(tmp_path):
    cb = make_pkg(tmp_path, m='''
        class Box:
            def __init__(self):
                self._v = 1
        ''')
    assert verdict(cb, "FieldsPrivate toy.m.Box _v").ok


def test_composed_of(tmp_path):
    cb = make_pkg(tmp_path, m='''
        class Inner:
            pass

        class Outer:
            _in: Inner

        class Child(Outer):
            pass

        class Loose:
            _in: object
        ''')
    assert verdict(cb, "ComposedOf toy.m.Child _in Inner").ok
    assert not verdict(cb, "ComposedOf toy.m.Loose _in Inner").ok
    assert "no annotation" in verdict(cb, "ComposedOf toy.m.Inner _in Inner").reason


@pytest.mark.parametrize("body,ok", [
    ("return self._n + 1", True),
    ("self._n = 0", False),
    ("self._n += 1", False),
    ("del self._n", False),
    ("self._items.append(1)", False),
    ("self._items[0] = 1", False),
    ("for self._n in range(2): pass", False),
    ("setattr(self, '_n', 3)", False),
    ("a, self._n = 1, 2", False),
    ("self._other = 1", True),
])
def test_no_mutates(tmp_path, body, ok):
    cb = make_pkg(tmp_path, m=f'''
        class C:
            def f(self):
                {body}
        ''')
    assert verdict(cb, "NoMutates toy.m.C.f _n _items").ok is ok


def test_no_calls_direct_only(tmp_path):
    cb = make_pkg(tmp_path, m='''
        def bad(x):
            x.poke(1)

        def indirect(x):
            helper(x)

        def helper(x):
            x.poke(1)
        ''')
    assert not verdict(cb, "NoCalls toy.m.bad poke").ok
    assert verdict(cb, "NoCalls toy.m.indirect poke").ok


def test_collect_and_render_round_trip(tmp_path):
    cb = make_pkg(tmp_path, m='''
        from hybridos.assertions import nocalls, not_duplicable
        from .base import Base

        @not_duplicable
        class T(Base):
            @nocalls("b", "a")
            def f(self):
                pass
        ''')
    found = cf.collect(cb)
    assert [a.text() for a in found] == ["NoCalls toy.m.T.f a b", "NotDuplicable toy.m.T"]
    manifest = tmp_path / "toy.manifest"
    manifest.write_text(cf.render(found))
    assert cf.check(manifest, cb).ok
    assert "toy/m.py:" in cf.render(found, located=True)
