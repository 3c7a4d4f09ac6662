//! Bundled demonstration programs: the inefficient Fibonacci implementations,
//! their efficient rewrites (renamed back to `fibonacci`), and the completions
//! served by the mock provider.

pub const FIB_TIME: &str = include_str!("../../../fixtures/fib_time.py");
pub const FIB_MEMORY: &str = include_str!("../../../fixtures/fib_memory.py");
pub const FIB_TIME_ITERATIVE: &str = include_str!("../../../fixtures/expected/fib_time_best.py");
pub const FIB_MEMORY_TWO_VARS: &str =
    include_str!("../../../fixtures/expected/fib_memory_best.py");
pub const COMPLETION_TIME: &str = include_str!("../../../fixtures/completions/time.txt");
pub const COMPLETION_MEMORY: &str = include_str!("../../../fixtures/completions/memory.txt");
pub const MOCK_MAP: &str = include_str!("../../../fixtures/mock_llm.json");
