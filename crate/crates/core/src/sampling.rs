//! Epoch orderings for minibatch training.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shuffles each class separately, then deals one sample per class in turn
/// so that every window of consecutive samples is close to class-balanced.
pub fn interleaved_order(labels: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    let longest = groups.iter().map(Vec::len).max().unwrap_or(0);
    let mut order = Vec::with_capacity(labels.len());
    for k in 0..longest {
        order.extend(groups.iter().filter_map(|g| g.get(k)));
    }
    order
}

/// Seeded stratified split: within each class, a shuffled `holdout` share
/// (rounded down) goes to the held-out side. Both sides keep input order.
pub fn stratified_split(labels: &[usize], holdout: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut held = vec![false; labels.len()];
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let k = (members.len() as f64 * holdout.clamp(0.0, 1.0)).floor() as usize;
        for &i in &members[..k] {
            held[i] = true;
        }
    }
    (0..labels.len()).partition(|&i| !held[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_with_balanced_windows() {
        let labels: Vec<usize> = (0..23).map(|i| (i * 7) % 4).collect();
        let order = interleaved_order(&labels, &mut ChaCha8Rng::seed_from_u64(1));
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..23).collect::<Vec<_>>());
        for w in order.chunks(4).take(5) {
            let mut seen: Vec<usize> = w.iter().map(|&i| labels[i]).collect();
            seen.sort();
            assert_eq!(seen, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let labels: Vec<usize> = (0..400).map(|i| i % 4).collect();
        let (train, held) = stratified_split(&labels, 0.2, 7);
        assert_eq!((train.len(), held.len()), (320, 80));
        for c in 0..4 {
            assert_eq!(held.iter().filter(|&&i| labels[i] == c).count(), 20);
        }
        assert_eq!(stratified_split(&labels, 0.2, 7), (train, held.clone()));
        assert_ne!(stratified_split(&labels, 0.2, 8).1, held);
    }
}
