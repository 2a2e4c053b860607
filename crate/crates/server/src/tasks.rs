//! Background work for `serve`: the rescore consumer, due source audits,
//! periodic digests and the periodic sweep.

use std::sync::Arc;
use std::time::Duration;

use termreg_core::ingest::Fetcher;
use termreg_core::Registry;
use tokio::sync::watch;
use tokio::task::JoinHandle;

#[derive(Debug, Clone, Copy)]
pub struct Schedule {
    pub poll: Duration,
    pub digest: Duration,
    pub sweep: Duration,
}

/// One poll: drain the rescore queue and run due audits. Saves when
/// anything changed. Returns the number of queue events processed.
pub fn poll_once(reg: &Registry, fetcher: &dyn Fetcher) -> termreg_core::Result<usize> {
    let audits = reg.run_pending_audits(fetcher)?;
    let drained = reg.drain_queue();
    if drained > 0 || !audits.is_empty() {
        reg.save()?;
    }
    Ok(drained)
}

async fn blocking<F>(name: &'static str, f: F)
where
    F: FnOnce() -> termreg_core::Result<()> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(())) => {}
        Ok(Err(e)) => tracing::warn!(task = name, error = %e, "background task failed"),
        Err(e) => tracing::error!(task = name, error = %e, "background task panicked"),
    }
}

fn every<F>(period: Duration, mut stop: watch::Receiver<bool>, name: &'static str, job: F) -> JoinHandle<()>
where
    F: Fn() -> termreg_core::Result<()> + Send + Sync + Clone + 'static,
{
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        // the first tick fires immediately; skip it
        tick.tick().await;
        loop {
            tokio::select! {
                _ = tick.tick() => blocking(name, job.clone()).await,
                _ = stop.changed() => break,
            }
        }
    })
}

/// Starts every background loop. Each loop exits when `stop` flips.
pub fn spawn(
    reg: Arc<Registry>,
    fetcher: Arc<dyn Fetcher>,
    schedule: Schedule,
    stop: watch::Receiver<bool>,
) -> Vec<JoinHandle<()>> {
    let poll = {
        let (reg, fetcher) = (reg.clone(), fetcher.clone());
        move || poll_once(&reg, fetcher.as_ref()).map(|_| ())
    };
    let digests = {
        let reg = reg.clone();
        move || {
            let sent = reg.generate_due_digests()?;
            if !sent.is_empty() {
                tracing::info!(count = sent.len(), "digests delivered");
                reg.save()?;
            }
            Ok(())
        }
    };
    let sweep = {
        let (reg, fetcher) = (reg.clone(), fetcher.clone());
        move || {
            let report = reg.run_sweep(fetcher.as_ref())?;
            tracing::info!(
                audits = report.audits.len(),
                events = report.events_processed,
                "sweep finished"
            );
            reg.save()
        }
    };
    vec![
        every(schedule.poll, stop.clone(), "poll", poll),
        every(schedule.digest, stop.clone(), "digest", digests),
        every(schedule.sweep, stop, "sweep", sweep),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use termreg_core::clock::SystemClock;
    use termreg_core::ingest::FetchError;
    use termreg_core::registry::{NewTerm, NewUser, RegistryConfig};

    struct NoFetch;
    impl Fetcher for NoFetch {
        fn fetch(&self, url: &str, _: Duration) -> Result<Vec<u8>, FetchError> {
            Err(FetchError(url.into()))
        }
    }

    #[test]
    fn poll_drains_the_queue() {
        let reg = Registry::new(RegistryConfig::default(), Arc::new(SystemClock)).unwrap();
        let u = reg.register_user(NewUser::new("ana")).unwrap();
        reg.propose_term(u.id, NewTerm::new("Creator", "Maker of a resource."))
            .unwrap();
        assert!(reg.queue_len() > 0);
        assert!(poll_once(&reg, &NoFetch).unwrap() > 0);
        assert_eq!(reg.queue_len(), 0);
        assert_eq!(poll_once(&reg, &NoFetch).unwrap(), 0);
    }

    #[tokio::test]
    async fn loops_stop_on_signal() {
        let reg = Arc::new(Registry::new(RegistryConfig::default(), Arc::new(SystemClock)).unwrap());
        let (tx, rx) = watch::channel(false);
        let ms = Duration::from_millis(5);
        let handles = spawn(
            reg,
            Arc::new(NoFetch),
            Schedule {
                poll: ms,
                digest: ms,
                sweep: ms,
            },
            rx,
        );
        tokio::time::sleep(Duration::from_millis(30)).await;
        tx.send(true).unwrap();
        for h in handles {
            tokio::time::timeout(Duration::from_secs(5), h).await.unwrap().unwrap();
        }
    }
}
