use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Static type of a MiniJ expression or declaration.
///
/// `Object` carries an optional class hint naming an extern class. The hint
/// only drives instance-call resolution; every object is `Object` for the
/// purpose of operation naming.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Type {
    Int,
    Float,
    Char,
    Boolean,
    Void,
    Object(Option<String>),
    Array(Box<Type>),
    /// Type of the `null` literal.
    Null,
    /// Placeholder left by the parser; the checker replaces every occurrence.
    Unresolved,
}

impl Type {
    pub fn array_of(elem: Type) -> Type {
        Type::Array(Box::new(elem))
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Type::Int | Type::Float | Type::Char)
    }

    /// `int` or `char`: operands accepted by shifts and integer bit operations.
    pub fn is_integral(&self) -> bool {
        matches!(self, Type::Int | Type::Char)
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, Type::Object(_) | Type::Array(_) | Type::Null)
    }

    /// Name used inside operation ids, e.g. `int`, `Object`, `char[]`, `null`.
    pub fn op_name(&self) -> String {
        use alloc::format;
        match self {
            Type::Int => "int".into(),
            Type::Float => "float".into(),
            Type::Char => "char".into(),
            Type::Boolean => "boolean".into(),
            Type::Void => "void".into(),
            Type::Object(_) => "Object".into(),
            Type::Array(elem) => format!("{}[]", elem.op_name()),
            Type::Null => "null".into(),
            Type::Unresolved => "?".into(),
        }
    }

    /// Result type of an arithmetic operator over two numeric operands.
    pub fn promote(a: &Type, b: &Type) -> Type {
        if *a == Type::Float || *b == Type::Float {
            Type::Float
        } else {
            Type::Int
        }
    }

    /// Whether a value of type `value` can be stored in a slot of type `self`.
    pub fn accepts(&self, value: &Type) -> bool {
        match (self, value) {
            (a, b) if a == b => true,
            (Type::Int, Type::Char) => true,
            (Type::Float, Type::Int | Type::Char) => true,
            (Type::Object(_), Type::Null) | (Type::Array(_), Type::Null) => true,
            (Type::Object(a), Type::Object(b)) => a.is_none() || b.is_none() || a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Object(Some(class)) => f.write_str(class),
            Type::Array(elem) => write!(f, "{elem}[]"),
            other => f.write_str(&other.op_name()),
        }
    }
}
