//! Small matplotlib scripts written next to the CSV files they read.

/// Log-log plot of the norm series in `csv` (columns as written by
/// `Trajectory::write_csv`), with optional reference slopes.
pub fn decay_script(csv: &str, slopes: &[(&str, f64)]) -> String {
    let refs: Vec<String> = slopes.iter().map(|(n, s)| format!("({n:?}, {s})")).collect();
    format!(
        r#"import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open({csv:?})))
t = [float(r["t"]) for r in rows]
fig, ax = plt.subplots()
for name in ("L2", "Linf", "H1dot"):
    y = [float(r[name]) for r in rows]
    ax.loglog([1 + s for s in t], y, label=name)
for name, slope in [{refs}]:
    y = [float(r[name]) for r in rows]
    a = y[-1] / (1 + t[-1]) ** slope
    ax.loglog([1 + s for s in t[1:]], [a * (1 + s) ** slope for s in t[1:]], "k:", lw=0.8)
ax.set_xlabel("1 + t")
ax.legend()
fig.savefig({png:?}, dpi=150)
"#,
        refs = refs.join(", "),
        png = csv.replace(".csv", ".png"),
    )
}

/// `‖u‖_∞` and `‖h(u)‖_{L¹}` against time for one run.
pub fn run_script(csv: &str) -> String {
    format!(
        r#"import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open({csv:?})))
t = [float(r["t"]) for r in rows]
fig, (a, b) = plt.subplots(2, 1, sharex=True)
a.semilogy(t, [float(r["Linf"]) for r in rows])
a.set_ylabel("sup |u|")
b.semilogy(t, [max(float(r["forcing_L1"]), 1e-300) for r in rows])
b.set_ylabel("|h(u)|_1")
b.set_xlabel("t")
fig.savefig("run.png", dpi=150)
"#
    )
}

/// Estimated lifespan against amplitude, one curve per forcing.
pub fn sweep_script() -> String {
    r#"import csv
import math
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("summary.csv")))
fig, ax = plt.subplots()
for forcing in sorted({r["forcing"] for r in rows}):
    pts = [(float(r["epsilon"]), float(r["t_est"])) for r in rows
           if r["forcing"] == forcing and r["status"] == "ok"]
    pts = [(e, t) for e, t in pts if math.isfinite(t)]
    if pts:
        ax.loglog(*zip(*sorted(pts)), "o-", label=forcing)
ax.set_xlabel("epsilon")
ax.set_ylabel("T_est")
ax.legend()
fig.savefig("sweep.png", dpi=150)
"#
    .to_string()
}

/// `Y(R)` and `log 2 · I_R` against `R`.
pub fn certificate_script() -> String {
    r#"import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("functionals.csv")))
r = [float(x["R"]) for x in rows]
fig, ax = plt.subplots()
ax.loglog(r, [float(x["Y"]) for x in rows], "o-", label="Y(R)")
ax.loglog(r, [float(x["log2_I_R"]) for x in rows], "s--", label="log2 * I_R")
ax.set_xlabel("R")
ax.legend()
fig.savefig("functionals.png", dpi=150)
"#
    .to_string()
}
