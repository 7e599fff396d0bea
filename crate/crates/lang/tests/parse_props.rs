use proptest::prelude::*;
use spatial_core::recon::synthetic::{synthesize_scene, SyntheticSceneSpec, TrajectoryPattern};
use spatial_core::scene::Scene;
use spatial_lang::ast::*;
use spatial_lang::*;
use std::sync::Arc;

fn leaf() -> impl Strategy<Value = ExprKind> {
    prop_oneof![
        (0i64..1_000_000).prop_map(ExprKind::Int),
        prop_oneof![Just(0.5), Just(2.0), Just(1e-7), Just(3.25e12), Just(1e300)].prop_map(ExprKind::Float),
        "[a-z \"'\\\\\n]{0,6}".prop_map(ExprKind::Str),
        any::<bool>().prop_map(ExprKind::Bool),
        Just(ExprKind::None),
        prop_oneof![Just("s"), Just("x"), Just("len"), Just("range"), Just("pySpatial")].prop_map(|n| ExprKind::Name(n.into())),
    ]
}

fn e(kind: ExprKind) -> Expr {
    Expr { kind, span: Span::default() }
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_map(e).prop_recursive(4, 48, 4, |inner| {
        let binop = prop_oneof![
            Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div),
            Just(BinOp::FloorDiv), Just(BinOp::Mod), Just(BinOp::Pow)
        ];
        let cmpop = prop_oneof![
            Just(CmpOp::Eq), Just(CmpOp::Ne), Just(CmpOp::Lt), Just(CmpOp::Le),
            Just(CmpOp::Gt), Just(CmpOp::Ge), Just(CmpOp::In), Just(CmpOp::NotIn)
        ];
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..3).prop_map(|v| e(ExprKind::List(v))),
            (inner.clone(), "q[a-z]{0,4}").prop_map(|(o, n)| e(ExprKind::Attribute { object: Box::new(o), name: n })),
            (inner.clone(), inner.clone()).prop_map(|(o, i)| e(ExprKind::Index { object: Box::new(o), index: Box::new(i) })),
            (inner.clone(), prop::collection::vec(inner.clone(), 0..3), prop::option::of(("q[a-z]{0,3}", inner.clone())))
                .prop_map(|(f, args, kw)| e(ExprKind::Call { func: Box::new(f), args, kwargs: kw.into_iter().collect() })),
            (prop_oneof![Just(UnaryOp::Neg), Just(UnaryOp::Pos), Just(UnaryOp::Not)], inner.clone())
                .prop_map(|(op, o)| e(ExprKind::Unary { op, operand: Box::new(o) })),
            (binop, inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| e(ExprKind::Binary { op, left: Box::new(l), right: Box::new(r) })),
            (inner.clone(), prop::collection::vec((cmpop, inner.clone()), 1..3))
                .prop_map(|(first, rest)| e(ExprKind::Compare { first: Box::new(first), rest })),
            (prop_oneof![Just(BoolOp::And), Just(BoolOp::Or)], prop::collection::vec(inner, 2..4))
                .prop_map(|(op, values)| e(ExprKind::BoolOp { op, values })),
        ]
    })
}

fn stmt(kind: StmtKind) -> Stmt {
    Stmt { kind, span: Span::default() }
}

fn program() -> impl Strategy<Value = Program> {
    (expr(), expr(), expr(), expr()).prop_map(|(a, b, c, d)| {
        let body = vec![
            stmt(StmtKind::Assign { target: Target::Name("x".into()), value: a }),
            stmt(StmtKind::For {
                var: "i".into(),
                iter: b,
                body: vec![stmt(StmtKind::If {
                    branches: vec![(c, vec![stmt(StmtKind::AugAssign { target: Target::Name("x".into()), op: BinOp::Add, value: e(ExprKind::Name("i".into())) })])],
                    orelse: Some(vec![stmt(StmtKind::Expr(e(ExprKind::Name("x".into()))))]),
                })],
            }),
            stmt(StmtKind::Return(Some(d))),
        ];
        let reference = parse_program("def program(s):\n    return 0\n").unwrap();
        let mut p = reference.without_spans();
        p.entry.body = body;
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pretty_print_reparses_to_same_tree(p in program()) {
        let text = pretty_print(&p);
        let q = parse_program(&text).map_err(|err| TestCaseError::fail(format!("{err}\n{text}")))?;
        prop_assert_eq!(q.without_spans(), p.without_spans(), "{}", text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn arbitrary_source_never_panics(src in "[a-z(): \\[\\]0-9=+*/.,'\"\n#-]{0,80}") {
        let _ = parse_program(&src);
        let _ = parse_program(&format!("def program(s):\n    {src}\n"));
    }

    #[test]
    fn generated_programs_terminate_with_output_or_error(p in program()) {
        let b = Arc::new(synthesize_scene(&SyntheticSceneSpec::desk(32, 24, TrajectoryPattern::Lateral { step: 0.4, count: 2 })).unwrap().0);
        let scene = Scene::from_bundle(&b, "q");
        let limits = ExecutionLimits { max_steps: 2_000, ..Default::default() };
        let _ = execute(&p, &scene, &FixedBundle(b), &limits, &ToolConfig::default());
    }
}
