use std::collections::HashMap;
use std::fmt::Write;

use super::{ChanId, CspModel, EventId, Guard, Term};

struct Namer<'a> {
    model: &'a CspModel,
    canonical: bool,
    chans: HashMap<ChanId, String>,
    events: HashMap<EventId, String>,
}

impl Namer<'_> {
    fn chan(&mut self, c: ChanId) -> String {
        if !self.canonical {
            return self.model.channels[c as usize].name.clone();
        }
        let n = self.chans.len();
        self.chans.entry(c).or_insert_with(|| format!("ch{n}")).clone()
    }

    fn event(&mut self, e: EventId) -> String {
        if !self.canonical {
            return self.model.events[e as usize].name.clone();
        }
        let n = self.events.len();
        self.events.entry(e).or_insert_with(|| format!("ev{n}")).clone()
    }

    fn guard(&mut self, g: &Guard) -> String {
        match g {
            Guard::Consumed(c) => format!("consumed({})", self.chan(*c)),
            Guard::Written(c) => format!("written({})", self.chan(*c)),
        }
    }

    fn term(&mut self, t: &Term, out: &mut String) {
        match t {
            Term::Skip => out.push_str("SKIP"),
            Term::Omega => out.push_str("OMEGA"),
            Term::Event(e) => {
                let name = self.event(*e);
                out.push_str(&name);
            }
            Term::Seq(p, q) => {
                out.push('(');
                self.term(p, out);
                out.push_str(" ; ");
                self.term(q, out);
                out.push(')');
            }
            Term::Choice(alts) if alts.is_empty() => out.push_str("STOP"),
            Term::Choice(alts) => {
                out.push('(');
                for (i, a) in alts.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" [] ");
                    }
                    self.term(a, out);
                }
                out.push(')');
            }
            Term::Par(p, q, sync) => {
                out.push('(');
                self.term(p, out);
                let names: Vec<String> = sync.iter().map(|e| self.event(*e)).collect();
                let _ = write!(out, " [|{{{}}}|] ", names.join(", "));
                self.term(q, out);
                out.push(')');
            }
            Term::Read { chan, event, guards, then } => {
                if !guards.is_empty() {
                    let gs: Vec<String> = guards.iter().map(|g| self.guard(g)).collect();
                    let _ = write!(out, "[{}] ", gs.join(", "));
                }
                if self.canonical {
                    let c = self.chan(*chan);
                    let _ = write!(out, "{c}? -> ");
                } else {
                    let _ = write!(out, "{} -> ", self.event(*event));
                }
                self.term(then, out);
            }
            Term::Write { chan, event, then } => {
                if self.canonical {
                    let c = self.chan(*chan);
                    let cap = self.model.channels[*chan as usize].capacity;
                    let _ = write!(out, "{c}!/{cap} -> ");
                } else {
                    let _ = write!(out, "{} -> ", self.event(*event));
                }
                self.term(then, out);
            }
        }
    }
}

impl CspModel {
    /// Renders a term with the model's channel and event names.
    pub fn render(&self, t: &Term) -> String {
        let mut n = Namer { model: self, canonical: false, chans: HashMap::new(), events: HashMap::new() };
        let mut out = String::new();
        n.term(t, &mut out);
        out
    }

    /// The root with channels and events renamed by order of first appearance.
    /// Two models are isomorphic up to renaming iff their shapes are equal.
    pub fn shape(&self) -> String {
        let mut n = Namer { model: self, canonical: true, chans: HashMap::new(), events: HashMap::new() };
        let mut out = String::new();
        n.term(&self.root, &mut out);
        out
    }

    /// Channel table followed by the root term.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in &self.channels {
            let origin = c.origin.map(|o| format!(" origin {o}")).unwrap_or_default();
            let hidden = if c.hidden { " hidden" } else { "" };
            let _ = writeln!(out, "channel {} capacity {}{hidden}{origin}", c.name, c.capacity);
        }
        let _ = writeln!(out, "root = {}", self.render(&self.root));
        out
    }
}
