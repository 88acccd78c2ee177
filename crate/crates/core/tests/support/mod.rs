pub mod oracle;
pub mod stub;
