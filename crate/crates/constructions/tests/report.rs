use hyperop_constructions::{scaling_report, Builder};

#[test]
fn report_does_not_depend_on_threads() {
    let b = Builder::AdvFno;
    let one = scaling_report(&b, &[64.0, 128.0], 32, 5, 1).unwrap();
    let four = scaling_report(&b, &[64.0, 128.0], 32, 5, 4).unwrap();
    assert_eq!(one.rows, four.rows);
    assert_eq!(one.to_json().unwrap(), four.to_json().unwrap());
}

#[test]
fn single_budget_has_no_fit() {
    let r = scaling_report(&Builder::BurgSdon { t: 1.5 }, &[1e-2], 8, 0, 1).unwrap();
    assert!(r.error_fit.is_none() && r.size_fit.is_none());
    assert!(r.notes.iter().any(|n| n.contains("no fit")), "{:?}", r.notes);
}

#[test]
fn csv_has_one_row_per_budget() {
    let r = scaling_report(&Builder::AdvSdon { eps: 1e-3 }, &[128.0, 256.0, 512.0], 16, 2, 1).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "budget,size,depth,width,mean_err,median_err");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("128,"));
    // more sensors, smaller error
    assert!(r.rows[2].mean_err < r.rows[0].mean_err);
}

#[test]
fn bad_budgets_are_rejected() {
    assert!(scaling_report(&Builder::AdvSdon { eps: 1e-3 }, &[128.5], 4, 0, 1).is_err());
    assert!(scaling_report(&Builder::AdvFno, &[], 4, 0, 1).is_err());
    assert!(scaling_report(&Builder::AdvFno, &[64.0], 0, 0, 1).is_err());
}
