//! Items that `std` puts in scope and `alloc` does not.

#[allow(unused_imports)]
pub(crate) use alloc::{
    borrow::ToOwned,
    boxed::Box,
    collections::{BTreeMap, BTreeSet},
    format,
    string::{String, ToString},
    vec,
    vec::Vec,
};
#[allow(unused_imports)]
pub(crate) use num_traits::Float;
