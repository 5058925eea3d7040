use proptest::prelude::*;

use super::*;
use crate::sim::{Feature, FeatureVector};

const A: Feature = Feature::TravelTime;
const B: Feature = Feature::QcBoundTrucks;
const C: Feature = Feature::QcRemainingTasks;

fn fig5() -> Vec<Token> {
    vec![
        Token::Op(Op::IfElse),
        Token::Op(Op::Ge),
        Token::Feature(A),
        Token::constant(5.0).unwrap(),
        Token::Op(Op::Mul),
        Token::Feature(B),
        Token::Feature(C),
        Token::constant(2.0).unwrap(),
    ]
}

fn fv(a: f64, b: f64, c: f64) -> FeatureVector {
    FeatureVector::default().with(A, a).with(B, b).with(C, c)
}

#[test]
fn if_else_tree_evaluates_both_branches() {
    let t = ExprTree::from_polish(&fig5()).unwrap();
    assert_eq!(t.depth(), 2);
    assert_eq!(t.token_count(), 8);
    assert_eq!(t.eval(&fv(6.0, 3.0, 4.0)), 12.0);
    assert_eq!(t.eval(&fv(4.0, 3.0, 4.0)), 2.0);
    assert_eq!(t.to_polish(), fig5());
    assert_eq!(t.to_string(), "if_else >= travel 5 * qc_trucks qc_remain 2");
}

#[test]
fn protected_division() {
    let t = parse_expr("/ 5 0.5").unwrap();
    assert_eq!(t.eval(&FeatureVector::default()), 10.0);
    let t = parse_expr("/ 5 - 1 1").unwrap();
    assert_eq!(t.eval(&FeatureVector::default()), 1.0);
}

#[test]
fn single_terminal_is_a_leaf() {
    let t = ExprTree::from_polish(&[Token::Feature(A)]).unwrap();
    assert_eq!(t.depth(), 0);
    assert_eq!(t, ExprTree::leaf(Token::Feature(A)));
}

#[test]
fn arity_errors_report_position() {
    assert_eq!(parse_expr("+ travel"), Err(ParseError::Incomplete { missing: 1 }));
    assert_eq!(parse_expr("* qc_trucks qc_remain 2"), Err(ParseError::TrailingTokens { index: 3 }));
    assert_eq!(parse_expr(""), Err(ParseError::Empty));
    assert!(matches!(parse_expr("+ 1 foo"), Err(ParseError::UnknownSymbol { index: 2, .. })));
    assert!(validate_prefix(&parse_tokens("* qc_trucks qc_remain").unwrap()));
    assert!(!validate_prefix(&parse_tokens("* qc_trucks qc_remain 2").unwrap()));
    assert!(!validate_prefix(&[]));
}

#[test]
fn unicode_and_alias_symbols() {
    let t = parse_expr("\u{d7} f2 \u{2212} f3 \u{f7} 1 2").unwrap();
    assert_eq!(t.to_string(), "* qc_trucks - qc_remain / 1 2");
}

#[test]
fn heuristic_file_round_trip() {
    let text = "# best of run\n\nmax travel idle\n  + 1 2  \n";
    let trees = read_heuristics(text).unwrap();
    assert_eq!(trees.len(), 2);
    assert_eq!(write_heuristics(&trees), "max travel idle\n+ 1 2\n");
    let err = read_heuristics("+ 1 2\n+ 1\n").unwrap_err();
    assert!(matches!(err, ParseError::Line { line: 2, .. }));
}

#[test]
fn subtree_editing() {
    let t = ExprTree::from_polish(&fig5()).unwrap();
    assert_eq!(t.subtree(4).to_owned(), parse_expr("* qc_trucks qc_remain").unwrap().root().clone());
    assert_eq!(t.node_depth(5), 2);
    let r = t.replace_subtree(4, Node::leaf(Token::Feature(A)));
    assert_eq!(r.to_string(), "if_else >= travel 5 travel 2");
    let r = t.replace_subtree(0, Node::leaf(Token::Feature(C)));
    assert_eq!(r.to_string(), "qc_remain");
    let r = t.replace_subtree(7, Node::leaf(Token::Feature(C)));
    assert_eq!(r.to_string(), "if_else >= travel 5 * qc_trucks qc_remain qc_remain");
}

fn arb_terminal() -> impl Strategy<Value = Token> {
    prop_oneof![
        (0..Feature::COUNT).prop_map(|i| Token::Feature(Feature::from_index(i).unwrap())),
        (0..CONSTANT_POOL.len() as u8).prop_map(Token::Const),
    ]
}

pub fn arb_tree() -> impl Strategy<Value = ExprTree> {
    let leaf = arb_terminal().prop_map(Node::leaf);
    leaf.prop_recursive(8, 96, 3, |inner| {
        (0..Op::ALL.len(), prop::collection::vec(inner, 3)).prop_map(|(i, mut kids)| {
            let op = Op::ALL[i];
            kids.truncate(op.arity());
            Node::new(Token::Op(op), kids)
        })
    })
    .prop_map(ExprTree::new)
}

fn arb_fv() -> impl Strategy<Value = FeatureVector> {
    prop::array::uniform14(prop_oneof![
        -1e6..1e6f64,
        Just(0.0),
        Just(f64::MAX),
        Just(-f64::MAX),
        Just(f64::MIN_POSITIVE),
    ])
    .prop_map(FeatureVector)
}

fn is_bool_op(t: Token) -> bool {
    matches!(t, Token::Op(Op::Ge | Op::Le | Op::And | Op::Or))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn polish_round_trip(t in arb_tree()) {
        let seq = t.to_polish();
        prop_assert!(validate_prefix(&seq));
        let back = ExprTree::from_polish(&seq).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(back.to_polish(), seq);
        prop_assert_eq!(parse_expr(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn eval_is_total(t in arb_tree(), x in arb_fv()) {
        prop_assert!(t.eval(&x).is_finite());
    }

    #[test]
    fn boolean_ops_closed(op in prop::sample::select(vec![Op::Ge, Op::Le, Op::And, Op::Or]),
                          l in arb_tree(), r in arb_tree(), x in arb_fv()) {
        let t = ExprTree::new(Node::new(Token::Op(op), vec![l.root().clone(), r.root().clone()]));
        prop_assert!(is_bool_op(t.root().token));
        let v = t.eval(&x);
        prop_assert!(v == 0.0 || v == 1.0);
    }

    #[test]
    fn every_proper_prefix_is_incomplete(t in arb_tree()) {
        let seq = t.to_polish();
        for n in 1..seq.len() {
            prop_assert!(!validate_prefix(&seq[..n]));
        }
    }
}
