#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use medbeads::bead::{sign, Keyring, SecretKey};
use medbeads::{BeadId, Clearance, Draft, Engine, EngineConfig, Role};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn synthea_dir() -> PathBuf {
    fixtures().join("synthea")
}

pub fn fast_config() -> EngineConfig {
    EngineConfig {
        durable: false,
        ..EngineConfig::default()
    }
}

pub fn open(dir: &Path) -> Engine {
    Engine::open(dir, fast_config()).expect("open engine")
}

pub const AUTHORS: [&str; 3] = ["did:medbeads:doctor:1", "did:medbeads:nurse:2", "did:medbeads:lab:3"];

/// A random DAG as stored: ids in insertion order plus parent lists by index.
#[derive(Debug, Clone)]
pub struct Dag {
    pub ids: Vec<BeadId>,
    pub parents: Vec<Vec<usize>>,
    pub drafts: Vec<Draft>,
}

impl Dag {
    pub fn index_of(&self) -> HashMap<BeadId, usize> {
        self.ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.ids.len()];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                ch[p].push(c);
            }
        }
        ch
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }
}

pub fn random_timestamp(rng: &mut StdRng) -> String {
    // Narrow range so equal timestamps (and tie-breaking by id) occur.
    let day = rng.gen_range(1..=28);
    let hour = rng.gen_range(0..3);
    let offset = ["Z", "+02:00", "-05:00"][rng.gen_range(0..3)];
    format!("2024-03-{day:02}T{hour:02}:00:00{offset}")
}

pub fn random_content(rng: &mut StdRng) -> Value {
    let mut m = serde_json::Map::new();
    for _ in 0..rng.gen_range(0..4) {
        let key: String = (0..rng.gen_range(1..6)).map(|_| rng.gen_range('a'..='z')).collect();
        let v = match rng.gen_range(0..5) {
            0 => json!(rng.gen_range(-1000..1000)),
            1 => json!(rng.gen_range(-1.0e3..1.0e3)),
            2 => json!(format!("note ü{}", rng.gen::<u16>())),
            3 => json!(rng.gen::<bool>()),
            _ => json!([rng.gen_range(0..9), {"z": 1, "a": [null]}]),
        };
        m.insert(key, v);
    }
    m.insert("nonce".into(), json!(rng.gen::<u64>()));
    Value::Object(m)
}

pub fn random_clearance(rng: &mut StdRng) -> Option<Clearance> {
    if rng.gen_bool(0.3) {
        let mut roles: Vec<Role> = Role::ALL.to_vec();
        roles.shuffle(rng);
        roles.truncate(rng.gen_range(1..4));
        Some(Clearance {
            denied_roles: roles,
            reason: rng.gen_bool(0.5).then(|| "restricted".to_string()),
        })
    } else {
        None
    }
}

/// Random drafts forming a DAG of `n` nodes: each node picks up to
/// `max_parents` distinct earlier nodes.
pub fn random_drafts(rng: &mut StdRng, n: usize, max_parents: usize) -> (Vec<Draft>, Vec<Vec<usize>>) {
    let mut drafts = Vec::with_capacity(n);
    let mut parents = Vec::with_capacity(n);
    let mut ids: Vec<BeadId> = Vec::with_capacity(n);
    for i in 0..n {
        let k = if i == 0 { 0 } else { rng.gen_range(0..=max_parents.min(i)) };
        let mut ps: Vec<usize> = (0..i).collect::<Vec<_>>().choose_multiple(rng, k).copied().collect();
        ps.sort_unstable();
        let mut d = Draft::new(
            ["observation", "encounter", "medical_note", "reasoning"][rng.gen_range(0..4)],
            random_timestamp(rng),
            AUTHORS[rng.gen_range(0..AUTHORS.len())],
        )
        .with_parents(ps.iter().map(|&p| ids[p].clone()))
        .with_content(random_content(rng));
        if let Some(c) = random_clearance(rng) {
            d = d.with_clearance(c);
        }
        ids.push(d.compute_id().expect("valid draft"));
        drafts.push(d);
        parents.push(ps);
    }
    (drafts, parents)
}

pub fn build_dag(engine: &Engine, rng: &mut StdRng, n: usize, max_parents: usize) -> Dag {
    let (drafts, parents) = random_drafts(rng, n, max_parents);
    let ids = drafts
        .iter()
        .map(|d| engine.put(d).expect("put").id)
        .collect();
    Dag { ids, parents, drafts }
}

pub struct Signers {
    pub keys: Vec<(String, SecretKey)>,
}

impl Signers {
    pub fn new(rng: &mut StdRng) -> Signers {
        Signers {
            keys: AUTHORS
                .iter()
                .map(|a| (a.to_string(), SecretKey::generate(rng)))
                .collect(),
        }
    }

    pub fn keyring(&self) -> Keyring {
        let mut k = Keyring::new();
        for (did, key) in &self.keys {
            k.insert(did.clone(), key.public_key());
        }
        k
    }

    pub fn sign(&self, draft: &Draft) -> String {
        let key = &self.keys.iter().find(|(d, _)| *d == draft.author).expect("known author").1;
        sign(draft, key).expect("sign")
    }
}

/// Like [`build_dag`] but every bead is signed by its author.
pub fn build_signed_dag(engine: &Engine, signers: &Signers, rng: &mut StdRng, n: usize, max_parents: usize) -> Dag {
    let (drafts, parents) = random_drafts(rng, n, max_parents);
    let ids = drafts
        .iter()
        .map(|d| engine.put_signed(d, Some(signers.sign(d))).expect("put").id)
        .collect();
    Dag { ids, parents, drafts }
}

/// Beads within `depth` hops of `start` along `adj`, computed by growing
/// level sets rather than a queue. `start` itself is excluded.
pub fn closure(adj: &[Vec<usize>], start: usize, depth: Option<u32>) -> BTreeSet<usize> {
    let mut reached: BTreeSet<usize> = BTreeSet::from([start]);
    let mut level = 0u32;
    loop {
        if depth.is_some_and(|d| level >= d) {
            break;
        }
        let next: BTreeSet<usize> = reached
            .iter()
            .flat_map(|&v| adj[v].iter().copied())
            .chain(reached.iter().copied())
            .collect();
        if next == reached {
            break;
        }
        reached = next;
        level += 1;
    }
    reached.remove(&start);
    reached
}

/// Vertex and edge counts of the subgraph explored by a depth-bounded walk:
/// vertices within `depth` hops (start included) and edges leaving the
/// vertices strictly inside the bound.
pub fn bounded_subgraph_size(adj: &[Vec<usize>], start: usize, depth: u32) -> (usize, usize) {
    let mut dist: BTreeMap<usize, u32> = BTreeMap::from([(start, 0)]);
    for level in 0..depth {
        let frontier: Vec<usize> = dist.iter().filter(|(_, &d)| d == level).map(|(&v, _)| v).collect();
        for v in frontier {
            for &w in &adj[v] {
                dist.entry(w).or_insert(level + 1);
            }
        }
    }
    let edges = dist
        .iter()
        .filter(|(_, &d)| d < depth)
        .map(|(&v, _)| adj[v].len())
        .sum();
    (dist.len(), edges)
}

/// Flips one byte of a stored object, returning the byte offset.
pub fn corrupt_byte(engine: &Engine, id: &BeadId, rng: &mut StdRng) -> usize {
    let path = engine.store().object_path(id).to_path_buf();
    let mut bytes = fs::read(&path).expect("read object");
    let at = rng.gen_range(0..bytes.len());
    bytes[at] ^= rng.gen_range(1..=255u8);
    fs::write(&path, bytes).expect("write object");
    at
}

/// Rewrites an object's content while keeping its id, as a forger would.
pub fn forge_content(engine: &Engine, id: &BeadId, content: Value) {
    let path = engine.store().object_path(id).to_path_buf();
    let mut doc: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    doc["content"] = content;
    fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
}

/// Every query answer the index can give, rendered deterministically.
pub fn index_snapshot(engine: &Engine) -> String {
    let index = engine.index();
    let mut ids = index.all_ids().unwrap();
    ids.sort();
    let mut out = String::new();
    for id in &ids {
        let r = index.record(id).unwrap().unwrap();
        out.push_str(&serde_json::to_string(&r).unwrap());
        out.push('\n');
        out.push_str(&format!("parents {:?}\n", index.parents_of(id).unwrap()));
        out.push_str(&format!("children {:?}\n", index.children_of(id).unwrap()));
    }
    out.push_str(&format!("roots {:?}\n", index.patient_roots().unwrap()));
    out.push_str(&format!("records {} edges {}\n", index.record_count().unwrap(), index.edge_count().unwrap()));
    out
}

/// Kahn's algorithm over `ids`, following parent links. Returns the order or
/// `None` when a cycle exists.
pub fn topo_sort(parents: &HashMap<BeadId, Vec<BeadId>>) -> Option<Vec<BeadId>> {
    let mut indegree: BTreeMap<&BeadId, usize> = parents.keys().map(|k| (k, 0)).collect();
    let mut children: HashMap<&BeadId, Vec<&BeadId>> = HashMap::new();
    for (c, ps) in parents {
        for p in ps {
            if parents.contains_key(p) {
                *indegree.get_mut(c).unwrap() += 1;
                children.entry(p).or_default().push(c);
            }
        }
    }
    let mut ready: Vec<&BeadId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
    let mut order = Vec::new();
    while let Some(v) = ready.pop() {
        order.push(v.clone());
        for &c in children.get(v).into_iter().flatten() {
            let d = indegree.get_mut(c).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(c);
            }
        }
    }
    (order.len() == parents.len()).then_some(order)
}

pub struct Server {
    pub base: String,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Serves `engine` on an ephemeral local port from a background runtime.
pub fn spawn_server(engine: Engine, config: medbeads::api::ApiConfig) -> Server {
    let (addr_tx, addr_rx) = std::sync::mpsc::channel();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            addr_tx.send(listener.local_addr().unwrap()).unwrap();
            let app = medbeads::api::router(std::sync::Arc::new(engine), &config);
            medbeads::api::serve(listener, app, async {
                let _ = stop_rx.await;
            })
            .await
            .unwrap();
        });
    });
    let addr = addr_rx.recv().expect("server address");
    Server {
        base: format!("http://{addr}"),
        shutdown: Some(stop_tx),
        thread: Some(thread),
    }
}
