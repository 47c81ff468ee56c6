use cohort_core::{tie_transition, Behavior, PreTie};
use cohort_oracles::formula_post_tie;

#[test]
fn rewiring_rule_matches_indicator_formulas_in_all_24_cases() {
    let behaviors = [Behavior::User, Behavior::NonUser];
    let mut cases = 0;
    for from in behaviors {
        for to in behaviors {
            for pre in [PreTie::NoTie, PreTie::Weak, PreTie::Strong] {
                for same in [true, false] {
                    assert_eq!(
                        tie_transition(from, to, pre, same),
                        formula_post_tie(from, to, pre, same),
                        "{from:?} -> {to:?}, {pre:?}, same group {same}"
                    );
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(cases, 24);
}
