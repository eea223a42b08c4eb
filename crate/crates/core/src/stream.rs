//! Counter-addressed random streams.
//!
//! Every random draw in a run is addressed by `(seed, player, iteration)`. The
//! generator is ChaCha8 keyed by the seed, with the player as stream id and the
//! iteration selecting a disjoint block of the keystream, so draws do not depend
//! on the order in which players or trials are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Keystream words reserved per iteration (far more than any round consumes).
const WORDS_PER_ITERATION: u128 = 1 << 32;

/// Generator for the draws of `player` at `iteration` in the trial keyed by `seed`.
pub fn substream(seed: u64, player: usize, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(player as u64);
    rng.set_word_pos(iteration as u128 * WORDS_PER_ITERATION);
    rng
}
