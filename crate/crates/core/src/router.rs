//! Scene-context routing: navigation events in, exit configuration out.
//!
//! The router holds the scene category most recently announced by the
//! navigation stream and resolves, per task, the exit strategy to apply.
//! Unknown scenes or tasks resolve to the default strategy — an unknown
//! context must never use an unvalidated aggressive exit.
//!
//! State updates are functional: [`RouterState::apply_event`] returns a new
//! state and never mutates the old one, so readers always observe either
//! the pre-event or the post-event snapshot. A host that needs one writer
//! and many concurrent readers can publish each new state behind an atomic
//! pointer swap; nothing here requires a particular primitive.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::ExitStrategy;
use crate::profiler::TaskProfiles;

/// A discrete driving context (e.g. "intersection", "traffic-light-zone").
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SceneCategory(pub String);

/// One announcement from the navigation stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavEvent {
    pub timestamp_ms: u64,
    pub scene: SceneCategory,
}

/// Offline-determined exit configuration: scene -> task -> exit layer,
/// with a default strategy for anything not covered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitConfigTable {
    pub entries: BTreeMap<SceneCategory, BTreeMap<String, u32>>,
    pub default_strategy: ExitStrategy,
}

impl ExitConfigTable {
    pub fn new(
        entries: BTreeMap<SceneCategory, BTreeMap<String, u32>>,
        default_strategy: ExitStrategy,
    ) -> Self {
        Self {
            entries,
            default_strategy,
        }
    }

    /// Builds the table from profiled selections and a scene -> tasks map.
    /// Every referenced task must have been profiled, and every selected
    /// layer must fit the model depth.
    pub fn from_profiles(
        profiles: &TaskProfiles,
        scene_tasks: &BTreeMap<String, Vec<String>>,
        default_strategy: ExitStrategy,
        num_layers: u32,
    ) -> Result<Self> {
        let mut entries: BTreeMap<SceneCategory, BTreeMap<String, u32>> = BTreeMap::new();
        for (scene, tasks) in scene_tasks {
            let mut per_task = BTreeMap::new();
            for task in tasks {
                let selection = profiles.selection(task).ok_or_else(|| {
                    Error::ConfigValidation(format!(
                        "scene '{scene}' references unprofiled task '{task}'"
                    ))
                })?;
                if selection.exit_layer < 1 || selection.exit_layer > num_layers {
                    return Err(Error::ConfigValidation(format!(
                        "scene '{scene}' task '{task}': exit layer {} outside [1, {num_layers}]",
                        selection.exit_layer
                    )));
                }
                per_task.insert(task.clone(), selection.exit_layer);
            }
            entries.insert(SceneCategory(scene.clone()), per_task);
        }
        Ok(Self {
            entries,
            default_strategy,
        })
    }
}

/// Router state: current scene plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterState {
    pub current_scene: Option<SceneCategory>,
    pub config_table: ExitConfigTable,
    pub last_event_ms: u64,
    pub switch_count: u64,
}

impl RouterState {
    pub fn new(config_table: ExitConfigTable) -> Self {
        Self {
            current_scene: None,
            config_table,
            last_event_ms: 0,
            switch_count: 0,
        }
    }

    /// Applies a navigation event, returning the successor state.
    ///
    /// Timestamps must be non-decreasing; an out-of-order event is rejected
    /// and the state is unchanged. Repeating the current scene is
    /// idempotent apart from the timestamp.
    pub fn apply_event(&self, event: &NavEvent) -> Result<RouterState> {
        if event.timestamp_ms < self.last_event_ms {
            return Err(Error::EventOrder {
                last_ms: self.last_event_ms,
                event_ms: event.timestamp_ms,
            });
        }
        let changed = self.current_scene.as_ref() != Some(&event.scene);
        Ok(RouterState {
            current_scene: Some(event.scene.clone()),
            config_table: self.config_table.clone(),
            last_event_ms: event.timestamp_ms,
            switch_count: self.switch_count + u64::from(changed),
        })
    }

    /// Resolves the strategy for `task_id` under the current scene. Pure:
    /// identical state and task always yield the identical strategy.
    pub fn resolve(&self, task_id: &str) -> ExitStrategy {
        if let Some(scene) = &self.current_scene {
            if let Some(per_task) = self.config_table.entries.get(scene) {
                if let Some(layer) = per_task.get(task_id) {
                    return ExitStrategy::FixedExit(*layer);
                }
            }
        }
        self.config_table.default_strategy.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiler::{AccuracyProfile, ExitSelection};
    use alloc::string::ToString;
    use alloc::vec;

    fn table_with(entries: &[(&str, &str, u32)]) -> ExitConfigTable {
        let mut map: BTreeMap<SceneCategory, BTreeMap<String, u32>> = BTreeMap::new();
        for (scene, task, layer) in entries {
            map.entry(SceneCategory(scene.to_string()))
                .or_default()
                .insert(task.to_string(), *layer);
        }
        ExitConfigTable::new(map, ExitStrategy::Full)
    }

    fn event(ts: u64, scene: &str) -> NavEvent {
        NavEvent {
            timestamp_ms: ts,
            scene: SceneCategory(scene.to_string()),
        }
    }

    #[test]
    fn repeated_scene_is_idempotent() {
        let state = RouterState::new(table_with(&[("a", "t", 3)]));
        let s1 = state.apply_event(&event(10, "a")).unwrap();
        let s2 = s1.apply_event(&event(20, "a")).unwrap();
        assert_eq!(s1.switch_count, 1);
        assert_eq!(s2.switch_count, 1);
        assert_eq!(s2.current_scene, Some(SceneCategory("a".into())));
    }

    #[test]
    fn scene_change_increments_switch_count() {
        let state = RouterState::new(table_with(&[("a", "t", 3), ("b", "t", 5)]));
        let s1 = state.apply_event(&event(10, "a")).unwrap();
        let s2 = s1.apply_event(&event(20, "b")).unwrap();
        assert_eq!(s2.switch_count, 2);
        assert_eq!(s2.current_scene, Some(SceneCategory("b".into())));
    }

    #[test]
    fn out_of_order_event_rejected() {
        let state = RouterState::new(table_with(&[]));
        let s1 = state.apply_event(&event(10, "a")).unwrap();
        let err = s1.apply_event(&event(5, "b")).unwrap_err();
        assert_eq!(
            err,
            Error::EventOrder {
                last_ms: 10,
                event_ms: 5
            }
        );
        // s1 itself is untouched (functional update).
        assert_eq!(s1.current_scene, Some(SceneCategory("a".into())));
        assert_eq!(s1.switch_count, 1);
    }

    #[test]
    fn resolve_hits_profiled_layer() {
        // A traffic-light-zone profile on a 32-layer backbone exiting at 25.
        let state = RouterState::new(table_with(&[("traffic-light-zone", "traffic-light", 25)]));
        let state = state.apply_event(&event(1, "traffic-light-zone")).unwrap();
        assert_eq!(
            state.resolve("traffic-light"),
            ExitStrategy::FixedExit(25)
        );
    }

    #[test]
    fn cold_start_and_unknown_task_use_default() {
        let state = RouterState::new(table_with(&[("a", "t", 3)]));
        assert_eq!(state.resolve("t"), ExitStrategy::Full);
        let state = state.apply_event(&event(1, "a")).unwrap();
        assert_eq!(state.resolve("unknown-task"), ExitStrategy::Full);
        let state = state.apply_event(&event(2, "unknown-scene")).unwrap();
        assert_eq!(state.resolve("t"), ExitStrategy::Full);
    }

    fn profiles_with(entries: &[(&str, u32)]) -> TaskProfiles {
        let mut map = BTreeMap::new();
        for (task, layer) in entries {
            let profile =
                AccuracyProfile::from_counts(task.to_string(), 10, vec![10; 14]).unwrap();
            let selection = ExitSelection {
                task_id: task.to_string(),
                exit_layer: *layer,
                satisfied_strictly: true,
                acc_at_exit: 1.0,
            };
            map.insert(task.to_string(), (profile, selection));
        }
        TaskProfiles { entries: map }
    }

    #[test]
    fn config_from_profiles() {
        let profiles = profiles_with(&[("vehicle", 14), ("pedestrian", 18)]);
        let mut scenes = BTreeMap::new();
        scenes.insert("highway".to_string(), vec!["vehicle".to_string()]);
        scenes.insert("crosswalk".to_string(), vec!["pedestrian".to_string()]);
        let table =
            ExitConfigTable::from_profiles(&profiles, &scenes, ExitStrategy::Full, 32).unwrap();
        assert_eq!(table.entries.len(), 2);
        assert_eq!(
            table.entries[&SceneCategory("highway".into())]["vehicle"],
            14
        );
    }

    #[test]
    fn empty_scene_map_gives_default_only_table() {
        let profiles = profiles_with(&[("vehicle", 14)]);
        let table =
            ExitConfigTable::from_profiles(&profiles, &BTreeMap::new(), ExitStrategy::Full, 32)
                .unwrap();
        assert!(table.entries.is_empty());
        let state = RouterState::new(table);
        assert_eq!(state.resolve("vehicle"), ExitStrategy::Full);
    }

    #[test]
    fn unprofiled_task_rejected() {
        let profiles = profiles_with(&[("vehicle", 14)]);
        let mut scenes = BTreeMap::new();
        scenes.insert("bike-lane".to_string(), vec!["cyclist".to_string()]);
        let err =
            ExitConfigTable::from_profiles(&profiles, &scenes, ExitStrategy::Full, 32).unwrap_err();
        match err {
            Error::ConfigValidation(msg) => assert!(msg.contains("cyclist")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn out_of_range_layer_rejected() {
        let profiles = profiles_with(&[("vehicle", 14)]);
        let mut scenes = BTreeMap::new();
        scenes.insert("highway".to_string(), vec!["vehicle".to_string()]);
        let err =
            ExitConfigTable::from_profiles(&profiles, &scenes, ExitStrategy::Full, 10).unwrap_err();
        assert!(matches!(err, Error::ConfigValidation(_)));
    }
}
