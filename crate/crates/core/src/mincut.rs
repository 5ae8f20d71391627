//! Exact two-terminal min cut on small directed networks with rational
//! capacities (Edmonds-Karp). Exactness matters: the separation routine
//! must agree with brute-force subset enumeration bit for bit, so all flow
//! arithmetic stays in `BigRational`.

use num::{Signed, Zero};

use crate::rational::Rat;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    residual: Rat,
    /// index of the reverse arc
    rev: usize,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, capacity: Rat) {
        debug_assert!(!capacity.is_negative());
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Arc {
            to,
            residual: capacity,
            rev: rev_from,
        });
        self.adj[to].push(Arc {
            to: from,
            residual: Rat::zero(),
            rev: rev_to,
        });
    }

    /// Max-flow value from `s` to `t`; the network keeps its residual
    /// state so the min cut can be read off afterwards.
    pub fn max_flow(&mut self, s: usize, t: usize) -> Rat {
        let n = self.adj.len();
        let mut total = Rat::zero();
        loop {
            // BFS for a shortest augmenting path
            let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(s);
            let mut reached = vec![false; n];
            reached[s] = true;
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for (idx, arc) in self.adj[u].iter().enumerate() {
                    if !reached[arc.to] && arc.residual.is_positive() {
                        reached[arc.to] = true;
                        pred[arc.to] = Some((u, idx));
                        queue.push_back(arc.to);
                    }
                }
            }
            if !reached[t] {
                return total;
            }
            // bottleneck
            let mut bottleneck: Option<Rat> = None;
            let mut v = t;
            while let Some((u, idx)) = pred[v] {
                let r = &self.adj[u][idx].residual;
                bottleneck = Some(match bottleneck {
                    None => r.clone(),
                    Some(b) => {
                        if *r < b {
                            r.clone()
                        } else {
                            b
                        }
                    }
                });
                v = u;
            }
            let aug = bottleneck.expect("path found");
            let mut v = t;
            while let Some((u, idx)) = pred[v] {
                let rev = self.adj[u][idx].rev;
                self.adj[u][idx].residual -= &aug;
                self.adj[v][rev].residual += &aug;
                v = u;
            }
            total += aug;
        }
    }

    /// Nodes reachable from `s` in the residual graph after a max flow:
    /// the source side of the (unique minimal-source-side) min cut.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let n = self.adj.len();
        let mut reached = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(s);
        reached[s] = true;
        while let Some(u) = queue.pop_front() {
            for arc in &self.adj[u] {
                if !reached[arc.to] && arc.residual.is_positive() {
                    reached[arc.to] = true;
                    queue.push_back(arc.to);
                }
            }
        }
        reached
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn classic_diamond() {
        // s -> a (3), s -> b (2), a -> b (1), a -> t (2), b -> t (3): max flow 5
        let mut net = FlowNetwork::new(4);
        let (s, a, b, t) = (0, 1, 2, 3);
        net.add_arc(s, a, rat(3, 1));
        net.add_arc(s, b, rat(2, 1));
        net.add_arc(a, b, rat(1, 1));
        net.add_arc(a, t, rat(2, 1));
        net.add_arc(b, t, rat(3, 1));
        assert_eq!(net.max_flow(s, t), rat(5, 1));
        let side = net.source_side(s);
        assert!(side[s] && !side[t]);
    }

    #[test]
    fn fractional_capacities_are_exact() {
        let mut net = FlowNetwork::new(3);
        net.add_arc(0, 1, rat(1, 3));
        net.add_arc(1, 2, rat(1, 6));
        assert_eq!(net.max_flow(0, 2), rat(1, 6));
    }
}
