use std::path::Path;
use std::process::{Command, Output};

fn onetprec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onetprec")).args(args).current_dir(cwd).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn identity_solve_reports_one_iteration_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "run.toml",
        "preconditioner = \"mult(jacobi(2, gamma=2/3), identity)\"\nseeds = [0, 1, 2, 3]\n[problem]\nvariant = \"Identity\"\nn = 20\n",
    );
    let a = onetprec(&["solve", "run.toml"], dir.path());
    let b = onetprec(&["solve", "run.toml"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let out = String::from_utf8(a.stdout).unwrap();
    assert_eq!(out.lines().count(), 6);
    assert!(out.lines().last().unwrap().contains("1.0 ± 0.0,converged 4/4"), "{out}");
}

#[test]
fn exit_codes_separate_nonconvergence_from_errors() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "slow.toml",
        "seeds = [0]\nsolver = { kind = \"pcg\" }\nstop = { max_iters = 2 }\n[problem]\nvariant = \"Poisson\"\ndim = 1\ncells = 64\n",
    );
    write(dir.path(), "bad.toml", "preconditioner = \"nosuch(1)\"\n[problem]\nvariant = \"Identity\"\nn = 5\n");
    let slow = onetprec(&["solve", "slow.toml", "-o", "slow.csv"], dir.path());
    assert_eq!(slow.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("slow.csv")).unwrap();
    assert!(csv.contains("converged 0/1"), "{csv}");
    let bad = onetprec(&["solve", "bad.toml"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("nosuch"));
    assert_eq!(onetprec(&["solve", "missing.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn dataset_generation_verifies() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.toml", "variant = \"Helm1D\"\nk_h = 10.0\ncells = 40\n");
    let gen = onetprec(&["gen-dataset", "p.toml", "-n", "4", "--seed", "7", "-o", "d.tp"], dir.path());
    assert_eq!(gen.status.code(), Some(0), "{}", String::from_utf8_lossy(&gen.stderr));
    let ver = onetprec(&["verify-dataset", "d.tp"], dir.path());
    assert_eq!(ver.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ver.stdout).contains("samples=4"));
    let dump = onetprec(&["dump-problem", "p.toml", "--seed", "3", "-o", "a.tp"], dir.path());
    assert_eq!(dump.status.code(), Some(0));
    let pack = onetprec::TensorPack::load(dir.path().join("a.tp")).unwrap();
    assert_eq!(pack.get("rhs").unwrap().shape, vec![41]);
}

#[test]
fn eigen_study_and_basis_dump_write_files() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "e.toml",
        "preconditioners = [\"exact\", \"mult(jacobi(1, gamma=auto), tb_coarse(4))\"]\n[problem]\nvariant = \"Helm1D\"\nk_h = 8.0\ncells = 32\n",
    );
    let e = onetprec(&["eigen-study", "e.toml", "-o", "e.csv"], dir.path());
    assert_eq!(e.status.code(), Some(0), "{}", String::from_utf8_lossy(&e.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("e.csv")).unwrap().lines().count(), 32);
    let b = onetprec(&["dump-basis", "--cells", "16", "-k", "3", "-o", "b.tp"], dir.path());
    assert_eq!(b.status.code(), Some(0));
}
