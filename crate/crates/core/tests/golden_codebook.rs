//! Frozen single-user 4-QAM codebook, derived by hand: with d = 1 and p = 1
//! each rail carries levels of +-1/2, the reference column is 1 and the
//! normalized profile makes X equal to S.

use nnmimo_core::constellations::{build_qam_udcg, RateAllocation};
use nnmimo_core::mustm::{Codebook, CodebookDocument, Permutation, SystemProfile};

fn golden() -> CodebookDocument {
    let text = include_str!("data/golden_qam4_single_user.json");
    serde_json::from_str(text).expect("golden file parses")
}

#[test]
fn single_user_qam4_matches_golden_file() {
    let rate = RateAllocation::uniform(1, 1, 1).unwrap();
    let u = build_qam_udcg(&rate, 1.0).unwrap();
    let profile = SystemProfile::normalized(1, 0.1).unwrap();
    let cb = Codebook::build(&u, &[1.0], &Permutation::identity(1), &profile).unwrap();
    let doc = cb.to_document();
    let want = golden();
    assert_eq!(doc.rate_allocation, want.rate_allocation);
    assert_eq!(doc.permutation, want.permutation);
    assert_eq!(doc.entries.len(), want.entries.len());
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    for (got, exp) in doc.sub_constellations[0].iter().zip(&want.sub_constellations[0]) {
        assert!(close(got[0], exp[0]) && close(got[1], exp[1]), "{got:?} vs {exp:?}");
    }
    for (got, exp) in doc.entries.iter().zip(&want.entries) {
        assert_eq!(got.index, exp.index);
        assert_eq!(got.bits, exp.bits);
        let flat = |e: &nnmimo_core::mustm::CodebookEntry| {
            let mut v: Vec<f64> = e.symbols.iter().flatten().copied().collect();
            v.extend(e.s_matrix.iter().flatten().flatten());
            v.extend(e.x_matrix.iter().flatten().flatten());
            v
        };
        for (a, b) in flat(got).into_iter().zip(flat(exp)) {
            assert!(close(a, b), "entry {}: {a} vs {b}", got.index);
        }
    }
}

#[test]
fn golden_file_round_trips_through_serde() {
    let doc = golden();
    let text = serde_json::to_string(&doc).unwrap();
    let back: CodebookDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc, back);
}
