use rand::seq::{IndexedRandom, SliceRandom};

use super::{AttackConfig, AttackError, AttackOutcome, Flip, Method, Progress, TargetLink};
use crate::ddne::DdneModel;
use crate::dynnet::{common_neighbors, Adjacency, NodeHistory};
use crate::rng::{self, Stream};

/// Common-neighbour attack on the most recent snapshot.
///
/// Removes links to the owner's neighbours sharing the most common neighbours
/// and adds links to non-neighbours sharing the fewest, alternating and
/// starting with a removal. Common neighbours are counted on `recent`; ties go
/// to the lower node index.
pub fn cna(
    model: &DdneModel,
    recent: &Adjacency,
    history: &NodeHistory,
    target: TargetLink,
    config: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let mut run = Progress::start(model, history, target, config)?;
    if recent.n() != history.width() {
        return Err(AttackError::Config("recent snapshot does not match the history width".into()));
    }
    let i = history.node();
    let k = history.len() - 1;
    let scored = |linked: bool| -> Result<Vec<(usize, usize)>, AttackError> {
        (0..history.width())
            .filter(|&v| v != i && history.get(k, v) == linked)
            .map(|v| {
                common_neighbors(recent, i, v)
                    .map(|c| (v, c))
                    .map_err(|e| AttackError::Config(e.to_string()))
            })
            .collect()
    };
    let mut adds = scored(false)?;
    adds.sort_by_key(|&(v, c)| (c, v));
    let mut removes = scored(true)?;
    removes.sort_by_key(|&(v, c)| (std::cmp::Reverse(c), v));

    let add_quota = config.effective_adds();
    let remove_quota = config.budget - add_quota;
    let mut adds = adds.into_iter().take(add_quota).map(|(v, _)| v);
    let mut removes = removes.into_iter().take(remove_quota).map(|(v, _)| v);
    let mut plan = Vec::with_capacity(config.budget);
    loop {
        let r = removes.next();
        let a = adds.next();
        if r.is_none() && a.is_none() {
            break;
        }
        plan.extend(r.into_iter().chain(a).map(|v| Flip::toggle(history, k, v)));
    }
    let exhausted = plan.len() < config.budget;
    apply_plan(model, &mut run, target, config, plan)?;
    run.finish(target, Method::Cna, config, exhausted)
}

/// Random attack: `adds` random additions and `budget - adds` random removals
/// across all snapshots, applied in random order.
///
/// `stream` selects the random stream, normally the target's index.
pub fn ra(
    model: &DdneModel,
    history: &NodeHistory,
    target: TargetLink,
    config: &AttackConfig,
    stream: u64,
) -> Result<AttackOutcome, AttackError> {
    let mut run = Progress::start(model, history, target, config)?;
    let mut rng = rng::stream(config.seed, Stream::RandomAttack, stream);
    let i = history.node();
    let cells = |linked: bool| -> Vec<(usize, usize)> {
        (0..history.len())
            .flat_map(|k| (0..history.width()).map(move |v| (k, v)))
            .filter(|&(k, v)| v != i && history.get(k, v) == linked)
            .collect()
    };
    let add_quota = config.effective_adds();
    let remove_quota = config.budget - add_quota;
    let mut plan: Vec<Flip> = cells(false)
        .choose_multiple(&mut rng, add_quota)
        .chain(cells(true).choose_multiple(&mut rng, remove_quota))
        .map(|&(k, v)| Flip::toggle(history, k, v))
        .collect();
    plan.shuffle(&mut rng);
    let exhausted = plan.len() < config.budget;
    apply_plan(model, &mut run, target, config, plan)?;
    run.finish(target, Method::Ra, config, exhausted)
}

fn apply_plan(
    model: &DdneModel,
    run: &mut Progress,
    target: TargetLink,
    config: &AttackConfig,
    plan: Vec<Flip>,
) -> Result<(), AttackError> {
    for flip in plan {
        let p = run.apply(model, target.j, flip)?;
        if config.early_stop && p <= config.threshold {
            break;
        }
    }
    Ok(())
}
