import pytest

from cirlab.interp import InterpreterError, cost_model, run
from cirlab import ir
from cirlab.parser import parse


def test_single_thread_two_outputs():
    p = parse("fn main() {\nb0:\n  a = const 1\n  b = const 2\n  output a\n  output b\n  ret\n}\nthread main()")
    r = run(p)
    assert r.trace.events == (1, 2)
    assert r.trace.status == "terminated"


def test_two_threads_explicit_schedule():
    text = """
    fn t1() {
    e:
      v = const 1
      output v
      ret
    }
    fn t2() {
    e:
      v = const 2
      output v
      ret
    }
    thread t1()
    thread t2()
    """
    p = parse(text)
    assert run(p, "explicit:1,2").trace.events == (1, 2)
    assert run(p, "explicit:2,1").trace.events == (2, 1)
    # T1 runs its whole body before T2 gets a turn
    assert run(p, "rr:3").trace.events == (1, 2)


def test_uncontended_cas():
    text = """
    class Box { fields v; }
    fn main() {
    b0:
      o = new Box
      five = const 5
      nine = const 9
      putfield o, v, five
      ok = cas o, v, five, nine
      r = getfield o, v
      output r
      ret
    }
    thread main()
    """
    r = run(parse(text))
    assert r.trace.events == (9,)
    assert r.metrics.atomic == 1


def test_failed_cas_leaves_value():
    text = """
    class Box { fields v; }
    fn main() {
    b0:
      o = new Box
      one = const 1
      two = const 2
      ok = cas o, v, one, two
      r = getfield o, v
      output r
      ret
    }
    thread main()
    """
    r = run(parse(text))
    assert r.trace.events == (0,)  # fields start at 0; expect=1 fails


def test_cost_model_table():
    assert cost_model(ir.binop("d", "add", "a", "b")) == 1
    assert cost_model(ir.cas("d", "o", "f", "e", "n")) == 8
    assert cost_model(ir.monitor("monitorenter", "o")) == 8
    assert cost_model(ir.monitor("wait", "o")) == 8
    assert cost_model(ir.new("d", "C")) == 4
    assert cost_model(ir.call("d", "f")) == 2
    assert cost_model(ir.vbinop("add", "c", "a", "b", "i", 4)) == 4
    assert cost_model(ir.output("v")) == 1


def test_metrics_mapping():
    text = """
    class C { fields f; methods m=work; }
    fn work(self) {
    e:
      z = const 0
      ret z
    }
    fn noop(x) {
    e:
      ret x
    }
    fn main() {
    b0:
      o = new C
      n = const 3
      a = newarray n
      monitorenter o
      monitorexit o
      z = const 0
      one = const 1
      c1 = cas o, f, z, one
      r1 = callvirtual o.m()
      h = handleconst noop
      r2 = callhandle h(one)
      r3 = call noop(one)
      park
      two = const 2
      unpark two
      output one
      ret
    }
    fn other() {
    e:
      one2 = const 1
      unpark one2
      ret
    }
    thread main()
    thread other()
    """
    r = run(parse(text), "rr:100")
    m = r.metrics
    assert m.synch == 1
    assert m.atomic == 1
    assert m.object == 1
    assert m.array == 1
    assert m.method == 2  # callvirtual + callhandle; plain call not counted
    assert m.idynamic == 1
    assert m.park == 1
    assert m.refcycles >= r.steps


def test_metric_conservation_against_op_log():
    text = """
    class C { methods m=work; }
    fn work(self) {
    e:
      z = const 0
      ret z
    }
    fn main() {
    b0:
      o = new C
      r1 = callvirtual o.m()
      h = handleconst work
      r2 = callhandle h(o)
      output r2
      ret
    }
    thread main()
    """
    r = run(parse(text), record_ops=True)
    assert r.op_log is not None
    assert r.metrics.method == sum(1 for op in r.op_log if op in ("callvirtual", "callhandle"))
    assert r.metrics.refcycles >= len(r.op_log)


def test_reentrant_monitor():
    text = """
    class L { }
    fn main() {
    b0:
      g = classref L
      monitorenter g
      monitorenter g
      monitorexit g
      monitorexit g
      one = const 1
      output one
      ret
    }
    thread main()
    """
    r = run(parse(text))
    assert r.trace.status == "terminated"
    assert r.metrics.synch == 2


def test_monitor_blocks_other_thread():
    text = """
    class L { fields done; }
    fn holder() {
    e:
      g = classref L
      monitorenter g
      one = const 1
      output one
      monitorexit g
      ret
    }
    fn contender() {
    e:
      g = classref L
      monitorenter g
      two = const 2
      output two
      monitorexit g
      ret
    }
    thread holder()
    thread contender()
    """
    p = parse(text)
    # schedule tries to run T2 right after T1 acquires; T2 stays blocked
    r = run(p, "explicit:1,1,2,2,2,1,1,1,2,2,2,2")
    assert r.trace.events == (1, 2)
    assert r.trace.status == "terminated"


def test_wait_notify_flag_protocol():
    text = """
    class S { fields ready, data; }
    fn waiter() {
    e:
      s = classref S
      monitorenter s
      br chk()
    chk():
      f = getfield s, ready
      one = const 1
      done = binop eq, f, one
      condbr done, fin(), slp()
    slp():
      wait s
      br chk()
    fin():
      d = getfield s, data
      monitorexit s
      output d
      ret
    }
    fn setter() {
    e:
      s = classref S
      v = const 42
      one = const 1
      monitorenter s
      putfield s, data, v
      putfield s, ready, one
      notify s
      monitorexit s
      ret
    }
    thread waiter()
    thread setter()
    """
    p = parse(text)
    for sched in ("rr:1", "rr:5", "explicit:2,2,2,2,2,2,2,2,2,1", "explicit:1,2"):
        r = run(p, sched)
        assert r.trace.events == (42,), sched
        assert r.trace.status == "terminated"
    r = run(p, "rr:1")
    assert r.metrics.wait == 1
    assert r.metrics.notify == 1


def test_wait_without_monitor_fails_run():
    text = """
    class S { }
    fn main() {
    b0:
      s = classref S
      wait s
      ret
    }
    thread main()
    """
    with pytest.raises(InterpreterError, match="monitor not owned"):
        run(parse(text))


def test_unpark_banks_single_permit():
    text = """
    fn main() {
    b0:
      me = const 1
      unpark me
      unpark me
      park
      park
      ret
    }
    fn other() {
    e:
      one = const 1
      unpark one
      ret
    }
    thread main()
    thread other()
    """
    # double unpark banks only one permit: first park consumes it, second parks
    r = run(parse(text), "explicit:1,1,1,1,1,2,2,2,1")
    assert r.trace.status == "terminated"
    assert r.metrics.park == 2


def test_deadlock_detection():
    text = """
    class S { }
    fn main() {
    b0:
      s = classref S
      monitorenter s
      wait s
      ret
    }
    thread main()
    """
    r = run(parse(text))
    assert r.trace.status == "deadlock"


def test_guard_deopt():
    text = """
    fn main() {
    b0:
      one = const 1
      output one
      zero = const 0
      c = binop lt, one, zero
      guard c, bounds
      two = const 2
      output two
      ret
    }
    thread main()
    """
    r = run(parse(text))
    assert r.trace.status == "deopt"
    assert r.trace.reason == "bounds"
    assert r.trace.events == (1,)


def test_budget_exhaustion():
    text = """
    fn main() {
    b0:
      br b0
    }
    thread main()
    """
    r = run(parse(text), budget=50)
    assert r.trace.status == "step-budget-exhausted"
    assert r.steps == 50


def test_determinism():
    text = """
    class G { fields n; }
    fn worker(k) {
    e:
      g = classref G
      zero = const 0
      br loop(zero)
    loop(i):
      c = binop lt, i, k
      condbr c, body(i), done()
    body(j):
      one = const 1
      v = getfield g, n
      v2 = binop add, v, one
      putfield g, n, v2
      j2 = binop add, j, one
      br loop(j2)
    done():
      r = getfield g, n
      output r
      ret
    }
    thread worker(3)
    thread worker(4)
    """
    p = parse(text)
    a = run(p, "rr:2")
    b = run(p, "rr:2")
    assert a.trace == b.trace
    assert a.metrics == b.metrics
    assert a.steps == b.steps


def test_virtual_dispatch_uses_dynamic_class():
    text = """
    class A { methods m=a_m; }
    class B extends A { methods m=b_m; }
    fn a_m(self) {
    e:
      v = const 1
      ret v
    }
    fn b_m(self) {
    e:
      v = const 2
      ret v
    }
    fn main() {
    b0:
      o = new B
      r = callvirtual o.m()
      output r
      ret
    }
    thread main()
    """
    assert run(parse(text)).trace.events == (2,)


def test_vbinop_semantics():
    text = """
    fn main() {
    b0:
      n = const 4
      a = newarray n
      b = newarray n
      c = newarray n
      zero = const 0
      one = const 1
      two = const 2
      arraystore a, zero, one
      arraystore a, one, two
      arraystore b, zero, two
      arraystore b, one, two
      vbinop add, c, a, b, zero, 4
      r0 = arrayload c, zero
      r1 = arrayload c, one
      r2 = arrayload c, two
      output r0
      output r1
      output r2
      ret
    }
    thread main()
    """
    assert run(parse(text)).trace.events == (3, 4, 0)


def test_division_semantics_truncate_toward_zero():
    text = """
    fn main() {
    b0:
      a = const -7
      b = const 2
      q = binop div, a, b
      m = binop mod, a, b
      output q
      output m
      ret
    }
    thread main()
    """
    assert run(parse(text)).trace.events == (-3, -1)
