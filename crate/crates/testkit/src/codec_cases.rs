//! Random ROS message schemas and values for codec round-trip checks.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rosann_core::codec::DecodedValue;
use rosann_core::TimeStamp;

use crate::ros::{self, OMsg, OType, OValue};

pub fn leaf(deps: Vec<String>) -> BoxedStrategy<OType> {
    let prims = prop_oneof![
        Just(OType::Bool),
        Just(OType::I8),
        Just(OType::U8),
        Just(OType::I16),
        Just(OType::U16),
        Just(OType::I32),
        Just(OType::U32),
        Just(OType::I64),
        Just(OType::U64),
        Just(OType::F32),
        Just(OType::F64),
        Just(OType::Str),
        Just(OType::Time),
        Just(OType::Duration),
    ];
    if deps.is_empty() {
        prims.boxed()
    } else {
        prop_oneof![4 => prims, 1 => proptest::sample::select(deps).prop_map(OType::Msg)].boxed()
    }
}

/// ROS1 has no arrays of arrays; depth comes from nested messages.
pub fn otype(deps: Vec<String>) -> BoxedStrategy<OType> {
    let inner = leaf(deps);
    prop_oneof![
        3 => inner.clone(),
        1 => (inner.clone(), 0usize..4).prop_map(|(t, n)| OType::Fixed(Box::new(t), n)),
        1 => inner.prop_map(|t| OType::Var(Box::new(t))),
    ]
    .boxed()
}

pub fn omsg(name: String, deps: Vec<String>) -> impl Strategy<Value = OMsg> {
    proptest::collection::vec(otype(deps), 1..6).prop_map(move |types| OMsg {
        name: name.clone(),
        fields: types.into_iter().enumerate().map(|(i, t)| (format!("f{i}"), t)).collect(),
    })
}

/// Root message plus 0..=2 dependencies; each dependency may only refer to
/// earlier ones, so the graph is acyclic.
pub fn schema_set() -> impl Strategy<Value = (OMsg, Vec<OMsg>)> {
    (0usize..=2).prop_flat_map(|n| {
        let names: Vec<String> = (0..n).map(|i| format!("dep_pkg/Dep{i}")).collect();
        let deps: Vec<BoxedStrategy<OMsg>> = (0..n)
            .map(|i| omsg(names[i].clone(), names[..i].to_vec()).boxed())
            .collect();
        (omsg("test_pkg/Root".into(), names), deps)
    })
}

pub fn ovalue(ty: &OType, reg: &BTreeMap<String, OMsg>) -> BoxedStrategy<OValue> {
    match ty {
        OType::Bool => any::<bool>().prop_map(OValue::Bool).boxed(),
        OType::I8 => any::<i8>().prop_map(OValue::I8).boxed(),
        OType::U8 => any::<u8>().prop_map(OValue::U8).boxed(),
        OType::I16 => any::<i16>().prop_map(OValue::I16).boxed(),
        OType::U16 => any::<u16>().prop_map(OValue::U16).boxed(),
        OType::I32 => any::<i32>().prop_map(OValue::I32).boxed(),
        OType::U32 => any::<u32>().prop_map(OValue::U32).boxed(),
        OType::I64 => any::<i64>().prop_map(OValue::I64).boxed(),
        OType::U64 => any::<u64>().prop_map(OValue::U64).boxed(),
        OType::F32 => any::<f32>().prop_filter("nan", |f| !f.is_nan()).prop_map(OValue::F32).boxed(),
        OType::F64 => any::<f64>().prop_filter("nan", |f| !f.is_nan()).prop_map(OValue::F64).boxed(),
        OType::Str => "[a-zA-Z0-9 _é]{0,12}".prop_map(OValue::Str).boxed(),
        OType::Time => (any::<u32>(), 0u32..1_000_000_000).prop_map(|(s, n)| OValue::Time(s, n)).boxed(),
        OType::Duration => (any::<i32>(), any::<i32>()).prop_map(|(s, n)| OValue::Duration(s, n)).boxed(),
        OType::Fixed(elem, n) => proptest::collection::vec(ovalue(elem, reg), *n).prop_map(OValue::List).boxed(),
        OType::Var(elem) => proptest::collection::vec(ovalue(elem, reg), 0..4).prop_map(OValue::List).boxed(),
        OType::Msg(name) => msg_value(&reg[name], reg),
    }
}

pub fn msg_value(msg: &OMsg, reg: &BTreeMap<String, OMsg>) -> BoxedStrategy<OValue> {
    let parts: Vec<BoxedStrategy<OValue>> = msg.fields.iter().map(|(_, t)| ovalue(t, reg)).collect();
    parts.prop_map(OValue::Msg).boxed()
}

pub struct Case {
    pub root: OMsg,
    pub definition: String,
    pub value: OValue,
    pub registry: BTreeMap<String, OMsg>,
}

impl std::fmt::Debug for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}\n{:?}", self.definition, self.value)
    }
}

pub fn case() -> impl Strategy<Value = Case> {
    schema_set().prop_flat_map(|(root, deps)| {
        let mut registry: BTreeMap<String, OMsg> = deps.iter().map(|d| (d.name.clone(), d.clone())).collect();
        registry.insert(root.name.clone(), root.clone());
        let definition = ros::definition_text(&root, &deps);
        msg_value(&root, &registry).prop_map(move |value| Case {
            root: root.clone(),
            definition: definition.clone(),
            value,
            registry: registry.clone(),
        })
    })
}

/// What the decoder should produce for an oracle value.
pub fn expected(ty: &OType, v: &OValue, reg: &BTreeMap<String, OMsg>) -> DecodedValue {
    match (ty, v) {
        (OType::Fixed(e, _) | OType::Var(e), OValue::List(items)) if **e == OType::U8 => DecodedValue::Bytes(
            items
                .iter()
                .map(|i| match i {
                    OValue::U8(b) => *b,
                    _ => unreachable!(),
                })
                .collect(),
        ),
        (OType::Fixed(e, _) | OType::Var(e), OValue::List(items)) => {
            DecodedValue::Array(items.iter().map(|i| expected(e, i, reg)).collect())
        }
        (OType::Msg(name), OValue::Msg(vals)) => expected_msg(&reg[name], vals, reg),
        (_, OValue::Bool(b)) => DecodedValue::Bool(*b),
        (_, OValue::I8(x)) => DecodedValue::I8(*x),
        (_, OValue::U8(x)) => DecodedValue::U8(*x),
        (_, OValue::I16(x)) => DecodedValue::I16(*x),
        (_, OValue::U16(x)) => DecodedValue::U16(*x),
        (_, OValue::I32(x)) => DecodedValue::I32(*x),
        (_, OValue::U32(x)) => DecodedValue::U32(*x),
        (_, OValue::I64(x)) => DecodedValue::I64(*x),
        (_, OValue::U64(x)) => DecodedValue::U64(*x),
        (_, OValue::F32(x)) => DecodedValue::F32(*x),
        (_, OValue::F64(x)) => DecodedValue::F64(*x),
        (_, OValue::Str(s)) => DecodedValue::Text(s.clone()),
        (_, OValue::Time(s, n)) => DecodedValue::Time(TimeStamp { secs: *s, nsecs: *n }),
        (_, OValue::Duration(s, n)) => DecodedValue::Duration { secs: *s, nsecs: *n },
        (t, v) => panic!("{t:?} / {v:?}"),
    }
}

pub fn expected_msg(msg: &OMsg, vals: &[OValue], reg: &BTreeMap<String, OMsg>) -> DecodedValue {
    DecodedValue::Message(
        msg.fields
            .iter()
            .zip(vals)
            .map(|((n, t), v)| (n.clone(), expected(t, v, reg)))
            .collect(),
    )
}

pub fn encoded(c: &Case) -> Vec<u8> {
    let mut out = Vec::new();
    ros::encode(&OType::Msg(c.root.name.clone()), &c.value, &c.registry, &mut out);
    out
}
