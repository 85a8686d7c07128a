//! Counter-based seeding: task `i` of a run with master seed `s` always
//! draws from stream `i` of the generator keyed by `s`, whatever thread
//! runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn task_rng(master: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(task);
    rng
}
