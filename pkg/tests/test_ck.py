from cirlab.ck import compute_ck
from cirlab.parser import parse

THREE_METHODS = """
class T { fields f, g; methods m1, m2, m3; }

fn m1(self) {
e:
  v = getfield self, f
  ret v
}
fn m2(self) {
e:
  v = getfield self, f
  ret v
}
fn m3(self) {
e:
  v = getfield self, g
  ret v
}
fn main() {
b0:
  o = new T
  r = callvirtual o.m1()
  output r
  ret
}
thread main()
"""

HIERARCHY = """
class A { fields x; methods base=a_base; }
class B extends A { fields y; }
class C extends A { fields z; }

fn a_base(self) {
e:
  v = getfield self, x
  ret v
}
fn main() {
b0:
  o = new B
  r = callvirtual o.base()
  output r
  ret
}
thread main()
"""


def _by_name(report):
    return {c.name: c for c in report.classes}


def test_lcom_hand_example():
    # m1 and m2 share f (Q=1); m1/m3 and m2/m3 share nothing (P=2); LCOM=1
    m = _by_name(compute_ck(parse(THREE_METHODS)))["T"]
    assert m.wmc == 3
    assert m.dit == 0
    assert m.noc == 0
    assert m.lcom == 1


def test_hierarchy_noc_dit():
    by = _by_name(compute_ck(parse(HIERARCHY)))
    assert by["A"].noc == 2
    assert by["B"].dit == 1
    assert by["C"].dit == 1
    assert by["A"].dit == 0
    assert by["B"].cbo >= 1  # coupled to A by inheritance


def test_single_isolated_class():
    text = """
    class S { methods only=s_only; }
    fn s_only(self) {
    e:
      z = const 0
      ret z
    }
    fn main() {
    b0:
      ret
    }
    thread main()
    """
    m = _by_name(compute_ck(parse(text)))["S"]
    assert (m.wmc, m.dit, m.noc, m.cbo, m.lcom) == (1, 0, 0, 0, 0)
    assert m.rfc == 1


def test_unreferenced_class_changes_nothing():
    base = compute_ck(parse(THREE_METHODS))
    extended = parse(THREE_METHODS + "\nclass Unused { fields q; }\n")
    after = compute_ck(extended)
    before_by, after_by = _by_name(base), _by_name(after)
    for name, m in before_by.items():
        assert after_by[name] == m
    assert after_by["Unused"].wmc == 0


def test_noc_sum_equals_subclass_edges():
    p = parse(HIERARCHY)
    report = compute_ck(p)
    assert report.sums()["noc"] == sum(1 for c in p.classes if c.superclass)


def test_lcom_invariant_under_method_reordering():
    reordered = THREE_METHODS.replace("methods m1, m2, m3;", "methods m3, m1, m2;")
    a = _by_name(compute_ck(parse(THREE_METHODS)))["T"]
    b = _by_name(compute_ck(parse(reordered)))["T"]
    assert a.lcom == b.lcom


def test_rfc_direct_vs_transitive():
    text = """
    class K { methods top=k_top; }
    fn leaf() {
    e:
      z = const 0
      ret z
    }
    fn middle() {
    e:
      r = call leaf()
      ret r
    }
    fn k_top(self) {
    e:
      r = call middle()
      ret r
    }
    fn main() {
    b0:
      ret
    }
    thread main()
    """
    p = parse(text)
    direct = _by_name(compute_ck(p))["K"]
    trans = _by_name(compute_ck(p, transitive=True))["K"]
    assert direct.rfc == 2  # k_top + middle
    assert trans.rfc == 3  # ... + leaf


def test_cbo_via_allocation_and_calls():
    text = """
    class P { methods act=p_act; }
    class Q { fields w; methods poke=q_poke; }
    fn q_poke(self) {
    e:
      v = getfield self, w
      ret v
    }
    fn p_act(self) {
    e:
      o = new Q
      r = callvirtual o.poke()
      ret r
    }
    fn main() {
    b0:
      ret
    }
    thread main()
    """
    by = _by_name(compute_ck(parse(text)))
    assert by["P"].cbo == 1  # touches Q by allocation and call
    assert by["Q"].cbo == 0


def test_csv_rendering_has_footer():
    text = compute_ck(parse(HIERARCHY)).to_csv()
    lines = text.strip().splitlines()
    assert lines[0].startswith("class,WMC")
    assert lines[-2].startswith("sum,")
    assert lines[-1].startswith("mean,")
