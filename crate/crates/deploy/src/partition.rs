/// Descriptors split across devices.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    pub shares: Vec<Vec<T>>,
    /// Items cut by the per-device limit.
    pub dropped: usize,
}

impl<T> Partition<T> {
    pub fn sizes(&self) -> Vec<usize> {
        self.shares.iter().map(Vec::len).collect()
    }
}

/// Contiguous even split: each of `devices` shares gets `floor(n/d)` or
/// `ceil(n/d)` items, larger shares first, input order preserved. A
/// per-device limit truncates each share and counts what it cut.
pub fn partition<T>(
    items: Vec<T>,
    devices: usize,
    per_device_limit: Option<usize>,
) -> Partition<T> {
    assert!(devices >= 1, "partition needs at least one device");
    let n = items.len();
    let base = n / devices;
    let extra = n % devices;
    let cap = per_device_limit.unwrap_or(usize::MAX);
    let mut iter = items.into_iter();
    let mut shares = Vec::with_capacity(devices);
    let mut dropped = 0;
    for k in 0..devices {
        let size = base + usize::from(k < extra);
        let mut share: Vec<T> = iter.by_ref().take(size).collect();
        if share.len() > cap {
            dropped += share.len() - cap;
            share.truncate(cap);
        }
        shares.push(share);
    }
    Partition { shares, dropped }
}
