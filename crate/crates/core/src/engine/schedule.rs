//! Speaking orders for the first round and the debate.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::rng::MeetingRng;

/// Reshuffles tried before settling for a schedule with back-to-back turns.
pub const MAX_SHUFFLE_ATTEMPTS: usize = 1000;

/// Uniformly random order of `n` speakers, as indices.
pub fn first_round_order(n: usize, rng: &mut MeetingRng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateSchedule {
    /// Speaker per debate turn, as indices into the voter list.
    pub turns: Vec<usize>,
    /// True when some speaker has two consecutive turns.
    pub has_adjacent_repeat: bool,
}

impl DebateSchedule {
    pub fn names<'a>(&self, voters: &'a [String]) -> Vec<&'a str> {
        self.turns.iter().map(|&i| voters[i].as_str()).collect()
    }
}

fn adjacent_repeat(turns: &[usize]) -> bool {
    turns.windows(2).any(|w| w[0] == w[1])
}

/// Every voter speaks `turns_per_voter` times in shuffled order. With
/// `avoid_repeats`, the multiset is reshuffled (up to
/// [`MAX_SHUFFLE_ATTEMPTS`] times) until nobody speaks twice in a row; the
/// conditioning is symmetric in the voters, so each position stays uniform.
pub fn make_debate_schedule(
    n_voters: usize,
    turns_per_voter: usize,
    avoid_repeats: bool,
    rng: &mut MeetingRng,
) -> DebateSchedule {
    assert!(n_voters > 0 && turns_per_voter > 0, "debate needs speakers and turns");
    let mut turns: Vec<usize> = (0..n_voters).flat_map(|v| std::iter::repeat_n(v, turns_per_voter)).collect();
    rng.shuffle(&mut turns);
    // equal counts: a repeat-free arrangement exists unless one voter speaks more than once
    let possible = n_voters > 1 || turns_per_voter == 1;
    if avoid_repeats && possible {
        let mut attempts = 1;
        while adjacent_repeat(&turns) && attempts < MAX_SHUFFLE_ATTEMPTS {
            rng.shuffle(&mut turns);
            attempts += 1;
        }
    }
    let has_adjacent_repeat = adjacent_repeat(&turns);
    DebateSchedule { turns, has_adjacent_repeat }
}

/// Aggregate over many seeds of the orders a meeting would draw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleStats {
    pub n_voters: usize,
    pub turns_per_voter: usize,
    pub draws: u64,
    /// `first_round[position][voter]`
    pub first_round: Vec<Vec<u64>>,
    /// `debate[position][voter]`
    pub debate: Vec<Vec<u64>>,
    /// Draws whose first-round order was not a permutation.
    pub invalid_first_round: u64,
    /// Draws whose debate schedule was not the expected multiset.
    pub invalid_debate: u64,
    pub with_adjacent_repeat: u64,
}

impl ScheduleStats {
    fn empty(n_voters: usize, turns_per_voter: usize) -> Self {
        Self {
            n_voters,
            turns_per_voter,
            draws: 0,
            first_round: vec![vec![0; n_voters]; n_voters],
            debate: vec![vec![0; n_voters]; n_voters * turns_per_voter],
            invalid_first_round: 0,
            invalid_debate: 0,
            with_adjacent_repeat: 0,
        }
    }

    fn observe(mut self, seed: u64, avoid_repeats: bool) -> Self {
        let (order, schedule) = draw_orders(seed, self.n_voters, self.turns_per_voter, avoid_repeats);
        self.draws += 1;
        let mut seen = vec![0usize; self.n_voters];
        for (pos, &v) in order.iter().enumerate() {
            self.first_round[pos][v] += 1;
            seen[v] += 1;
        }
        if order.len() != self.n_voters || seen.iter().any(|&c| c != 1) {
            self.invalid_first_round += 1;
        }
        let mut seen = vec![0usize; self.n_voters];
        for (pos, &v) in schedule.turns.iter().enumerate() {
            self.debate[pos][v] += 1;
            seen[v] += 1;
        }
        if schedule.turns.len() != self.n_voters * self.turns_per_voter
            || seen.iter().any(|&c| c != self.turns_per_voter)
        {
            self.invalid_debate += 1;
        }
        if schedule.has_adjacent_repeat {
            self.with_adjacent_repeat += 1;
        }
        self
    }

    /// Combines tallies from disjoint seed ranges.
    pub fn merge(mut self, other: Self) -> Self {
        fn add(a: &mut [Vec<u64>], b: &[Vec<u64>]) {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
        }
        self.draws += other.draws;
        add(&mut self.first_round, &other.first_round);
        add(&mut self.debate, &other.debate);
        self.invalid_first_round += other.invalid_first_round;
        self.invalid_debate += other.invalid_debate;
        self.with_adjacent_repeat += other.with_adjacent_repeat;
        self
    }

    /// Largest |count - mean| / sd over all (position, voter) cells, using
    /// the binomial(draws, 1/n_voters) expectation.
    pub fn max_z_score(&self) -> f64 {
        let p = 1.0 / self.n_voters as f64;
        let n = self.draws as f64;
        let mean = n * p;
        let sd = (n * p * (1.0 - p)).sqrt();
        self.first_round
            .iter()
            .chain(self.debate.iter())
            .flatten()
            .map(|&c| (c as f64 - mean).abs() / sd)
            .fold(0.0, f64::max)
    }
}

/// The first-round order and debate schedule a meeting with `seed` draws,
/// in the order the meeting draws them.
pub fn draw_orders(seed: u64, n_voters: usize, turns_per_voter: usize, avoid_repeats: bool) -> (Vec<usize>, DebateSchedule) {
    let mut rng = MeetingRng::with_stream(seed, super::SCHEDULE_STREAM);
    let order = first_round_order(n_voters, &mut rng);
    let schedule = make_debate_schedule(n_voters, turns_per_voter, avoid_repeats, &mut rng);
    (order, schedule)
}

/// Draws orders for every seed in `seeds` and tallies speaker frequencies
/// per position. Runs on the rayon pool when the `parallel` feature is on.
pub fn schedule_stats(seeds: Range<u64>, n_voters: usize, turns_per_voter: usize, avoid_repeats: bool) -> ScheduleStats {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let empty = || ScheduleStats::empty(n_voters, turns_per_voter);
        seeds
            .into_par_iter()
            .fold(empty, |acc, seed| acc.observe(seed, avoid_repeats))
            .reduce(empty, ScheduleStats::merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        schedule_stats_sequential(seeds, n_voters, turns_per_voter, avoid_repeats)
    }
}

/// Single-threaded [`schedule_stats`].
pub fn schedule_stats_sequential(
    seeds: Range<u64>,
    n_voters: usize,
    turns_per_voter: usize,
    avoid_repeats: bool,
) -> ScheduleStats {
    seeds.fold(ScheduleStats::empty(n_voters, turns_per_voter), |acc, seed| acc.observe(seed, avoid_repeats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_by_three_is_fifteen_turns() {
        let mut rng = MeetingRng::from_seed(42);
        let s = make_debate_schedule(5, 3, true, &mut rng);
        assert_eq!(s.turns.len(), 15);
        for v in 0..5 {
            assert_eq!(s.turns.iter().filter(|&&t| t == v).count(), 3);
        }
        assert!(!s.has_adjacent_repeat);
    }

    #[test]
    fn single_voter_is_flagged() {
        let s = make_debate_schedule(1, 3, true, &mut MeetingRng::from_seed(0));
        assert_eq!(s.turns, vec![0, 0, 0]);
        assert!(s.has_adjacent_repeat);
        let one = make_debate_schedule(1, 1, true, &mut MeetingRng::from_seed(0));
        assert!(!one.has_adjacent_repeat);
    }

    #[test]
    fn same_seed_same_orders() {
        assert_eq!(draw_orders(42, 5, 3, true), draw_orders(42, 5, 3, true));
        assert_ne!(draw_orders(42, 5, 3, true), draw_orders(43, 5, 3, true));
    }

    #[test]
    fn repeats_allowed_when_disabled() {
        let stats = schedule_stats_sequential(0..500, 5, 3, false);
        assert!(stats.with_adjacent_repeat > 0);
        assert_eq!(stats.invalid_debate, 0);
    }

    /// Brute-force per-draw validity, independent of the stats bookkeeping.
    #[test]
    fn thousand_seeds_are_valid_multiset_permutations() {
        let mut repeats = 0;
        for seed in 0..1000u64 {
            let (order, schedule) = draw_orders(seed, 5, 3, true);
            let mut sorted = order.clone();
            sorted.sort();
            assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
            let mut turns = schedule.turns.clone();
            turns.sort();
            assert_eq!(turns, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4]);
            if schedule.turns.windows(2).any(|w| w[0] == w[1]) {
                repeats += 1;
            }
        }
        assert_eq!(repeats, 0);
    }

    #[test]
    fn parallel_and_sequential_stats_agree() {
        assert_eq!(schedule_stats(0..300, 4, 2, true), schedule_stats_sequential(0..300, 4, 2, true));
    }
}
