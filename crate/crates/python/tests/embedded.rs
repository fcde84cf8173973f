use pyo3::prelude::*;
use pywdioph::pywdioph;

const SCRIPT: &std::ffi::CStr = cr#"
import pywdioph as wd

x = wd.TargetVector("1/3, 1/5")
w = wd.Weight("1/2, 1/2")
assert wd.quasi_norm(x, w)["exact"] == "1/9"
assert wd.dirichlet_solve(x, w, 15)["q"] == 6
golden = wd.TargetVector("golden")
qs = [e["q"] for e in wd.best_sequence(golden, wd.Weight.standard(1), 100)["entries"]]
assert qs == [1, 2, 3, 5, 8, 13, 21, 34, 55, 89], qs
assert wd.solve_linear_diophantine(4, 6, 3) is None
assert wd.exponent_relation_check("4/5") == "6/5"
assert len(wd.WeightSet.grid(2, "1/8")) == 7
try:
    wd.Weight("1/2, 1/3")
    raise AssertionError("weights not summing to 1 were accepted")
except wd.WdiophError:
    pass
"#;

#[test]
fn module_runs_in_embedded_interpreter() {
    pyo3::append_to_inittab!(pywdioph);
    Python::initialize();
    Python::attach(|py| {
        if let Err(e) = py.run(SCRIPT, None, None) {
            e.print(py);
            panic!("embedded script failed: {e}");
        }
    });
}
