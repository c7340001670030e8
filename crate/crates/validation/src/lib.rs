//! Holds the `acceptance` test target, which prints one PASS/FAIL line per
//! criterion. Kept in its own package so that cargo runs it after every other
//! test binary in the workspace.
