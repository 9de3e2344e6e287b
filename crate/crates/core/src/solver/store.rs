use crate::csp::VarId;

/// Raised when a propagator empties a domain or proves the constraint unsatisfiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wipeout;

/// Trailed domain store. Domains are bitmaps over the positions of the
/// initially declared values, so value order is never disturbed.
#[derive(Debug, Clone)]
pub struct DomainStore {
    values: Vec<Vec<i64>>,
    alive: Vec<Vec<bool>>,
    size: Vec<usize>,
    trail: Vec<(VarId, usize)>,
    touched: Vec<VarId>,
    touched_flag: Vec<bool>,
}

impl DomainStore {
    pub fn new(domains: Vec<Vec<i64>>) -> Self {
        let alive = domains.iter().map(|d| vec![true; d.len()]).collect();
        let size = domains.iter().map(Vec::len).collect();
        let n = domains.len();
        DomainStore {
            values: domains,
            alive,
            size,
            trail: Vec::new(),
            touched: Vec::new(),
            touched_flag: vec![false; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    pub fn initial(&self, var: VarId) -> &[i64] {
        &self.values[var]
    }

    pub fn value(&self, var: VarId, pos: usize) -> i64 {
        self.values[var][pos]
    }

    pub fn is_alive(&self, var: VarId, pos: usize) -> bool {
        self.alive[var][pos]
    }

    pub fn size(&self, var: VarId) -> usize {
        self.size[var]
    }

    /// Position of the only remaining value, if the variable is fixed.
    pub fn fixed_pos(&self, var: VarId) -> Option<usize> {
        if self.size[var] == 1 {
            self.alive[var].iter().position(|&a| a)
        } else {
            None
        }
    }

    pub fn alive_positions(&self, var: VarId) -> impl Iterator<Item = usize> + '_ {
        self.alive[var].iter().enumerate().filter_map(|(p, &a)| a.then_some(p))
    }

    pub fn current(&self, var: VarId) -> Vec<i64> {
        self.alive_positions(var).map(|p| self.values[var][p]).collect()
    }

    /// Removes one value. Returns `Ok(true)` if it was present.
    pub fn remove(&mut self, var: VarId, pos: usize) -> Result<bool, Wipeout> {
        if !self.alive[var][pos] {
            return Ok(false);
        }
        self.alive[var][pos] = false;
        self.size[var] -= 1;
        self.trail.push((var, pos));
        if !self.touched_flag[var] {
            self.touched_flag[var] = true;
            self.touched.push(var);
        }
        if self.size[var] == 0 {
            Err(Wipeout)
        } else {
            Ok(true)
        }
    }

    /// Removes every value except `pos`.
    pub fn assign(&mut self, var: VarId, pos: usize) -> Result<(), Wipeout> {
        for p in 0..self.values[var].len() {
            if p != pos {
                self.remove(var, p)?;
            }
        }
        if self.alive[var][pos] {
            Ok(())
        } else {
            Err(Wipeout)
        }
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (var, pos) = self.trail.pop().expect("trail longer than mark");
            self.alive[var][pos] = true;
            self.size[var] += 1;
        }
        self.clear_touched();
    }

    /// Variables modified since the last call, in first-touch order.
    pub fn take_touched(&mut self) -> Vec<VarId> {
        for &v in &self.touched {
            self.touched_flag[v] = false;
        }
        std::mem::take(&mut self.touched)
    }

    pub fn clear_touched(&mut self) {
        let _ = self.take_touched();
    }
}
