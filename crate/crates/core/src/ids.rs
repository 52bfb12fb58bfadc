//! Identifier newtypes shared across modules.

use std::fmt;

macro_rules! string_id {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(SiteId);
string_id!(CeId);
string_id!(SeId);
string_id!(HostId);
string_id!(RbId);
string_id!(VoName);
string_id!(
    /// A user's certificate subject.
    UserDn
);

/// Logical file name. The optional `lfn:` scheme prefix is stripped, so
/// `lfn:demo_22.ntpl` and `demo_22.ntpl` name the same file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lfn(String);

impl Lfn {
    pub fn new(s: &str) -> Self {
        let s = s.trim();
        Lfn(s.strip_prefix("lfn:").unwrap_or(s).to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Lfn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Lfn {
    fn from(s: &str) -> Self {
        Lfn::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lfn_prefix_is_stripped() {
        assert_eq!(Lfn::new("lfn:demo_22.ntpl"), Lfn::new("demo_22.ntpl"));
        assert_eq!(Lfn::new("lfn:demo_22.ntpl").to_string(), "demo_22.ntpl");
    }
}
