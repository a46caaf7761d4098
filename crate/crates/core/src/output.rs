//! CSV traces, exploration dumps, and metrics summaries.
//!
//! Column order is fixed; see [`TRACE_HEADER`] and [`DUMP_HEADER`].

use std::io::{self, Write};

use crate::search::RootActionRow;
use crate::sim::{Metrics, SimulationTrace};

/// Positions and heading are in world coordinates; velocities and
/// accelerations in the agent's own frame. The last row of each agent holds
/// the final state and has empty action and reward fields.
pub const TRACE_HEADER: &str = "step,time,agent,x,y,heading,vx,vy,ax,ay,dv,dy,group,r_state,r_action,r_validation,r_total,valid_state,valid_action,collision";

pub const DUMP_HEADER: &str = "scenario_hash,step,agent,dv,dy,n,q,group,selected";

pub fn write_trace_csv<W: Write>(trace: &SimulationTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for st in &trace.steps {
        for (i, info) in trace.agents.iter().enumerate() {
            let s = &st.states[i];
            let pose = info.direction.to_world(&trace.road, s.x, s.y, s.heading);
            let a = &st.actions[i];
            let r = &st.rewards[i];
            let v = &st.validation[i];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                st.step,
                st.time,
                info.id,
                pose.x,
                pose.y,
                pose.heading,
                s.vx,
                s.vy,
                s.ax,
                s.ay,
                a.dv,
                a.dy,
                st.groups[i],
                r.state,
                r.action,
                r.validation,
                r.total(),
                u8::from(v.valid_state),
                u8::from(v.valid_action),
                u8::from(v.collision)
            )?;
        }
    }
    for (i, info) in trace.agents.iter().enumerate() {
        let s = &trace.final_states[i];
        let pose = info.direction.to_world(&trace.road, s.x, s.y, s.heading);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},,,,,,,,,,",
            trace.steps.len(),
            trace.final_time,
            info.id,
            pose.x,
            pose.y,
            pose.heading,
            s.vx,
            s.vy,
            s.ax,
            s.ay
        )?;
    }
    Ok(())
}

/// Writes the root rows of one search. `agent_ids` maps agent indices to names.
pub fn write_dump_csv<W: Write>(
    scenario_hash: &str,
    step: usize,
    agent_ids: &[String],
    rows: &[RootActionRow],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "{DUMP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            scenario_hash,
            step,
            agent_ids[r.agent],
            r.action.dv,
            r.action.dy,
            r.n,
            r.q,
            r.group,
            u8::from(r.selected)
        )?;
    }
    Ok(())
}

/// Single-line `key=value` record.
pub fn metrics_record(label: &str, agent_ids: &[String], m: &Metrics) -> String {
    let mut fields = vec![
        format!("run={label}"),
        format!("velocity_deviation={:.6}", m.velocity_deviation),
        format!("collision_count={}", m.collision_count),
        format!("steps_completed={}", m.steps_completed),
    ];
    for (id, v) in agent_ids.iter().zip(&m.min_speed) {
        fields.push(format!("min_speed_{id}={v:.6}"));
    }
    for (id, v) in agent_ids.iter().zip(&m.per_agent_deviation) {
        fields.push(format!("deviation_{id}={v:.6}"));
    }
    fields.join(" ")
}

/// Human-readable table of per-agent metrics.
pub fn metrics_table(agent_ids: &[String], m: &Metrics) -> String {
    let mut s = format!("{:<12} {:>14} {:>12}\n", "agent", "deviation [m]", "min v [m/s]");
    for (i, id) in agent_ids.iter().enumerate() {
        s.push_str(&format!(
            "{:<12} {:>14.3} {:>12.3}\n",
            id, m.per_agent_deviation[i], m.min_speed[i]
        ));
    }
    s.push_str(&format!(
        "{:<12} {:>14.3}\ncollisions {}, steps {}\n",
        "total", m.velocity_deviation, m.collision_count, m.steps_completed
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::ActionGroup;
    use crate::trajectory::Action;

    #[test]
    fn dump_rows_follow_header() {
        let rows = [RootActionRow {
            agent: 0,
            action: Action::new(1.5, -0.25),
            n: 3.0,
            q: -7.5,
            group: ActionGroup::LeftDecelerate,
            selected: true,
        }];
        let mut buf = Vec::new();
        write_dump_csv("abc", 4, &["green".into()], &rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], DUMP_HEADER);
        assert_eq!(lines[1], "abc,4,green,1.5,-0.25,3,-7.5,L-,1");
        assert_eq!(lines[1].split(',').count(), DUMP_HEADER.split(',').count());
    }

    #[test]
    fn record_is_single_line() {
        let m = Metrics {
            velocity_deviation: 1.0,
            per_agent_deviation: vec![1.0],
            min_speed: vec![2.0],
            collision_count: 0,
            steps_completed: 3,
        };
        let r = metrics_record("x", &["a".into()], &m);
        assert!(!r.contains('\n'));
        assert!(r.contains("min_speed_a=2.000000"));
    }
}
