import type { Debrief, SessionState } from "./types";

/**
 * Everything the console renders, derived purely from the latest server
 * response plus local in-flight flags. No field is fabricated: the ability
 * chart exists only when the model supplied estimates.
 */
export interface ConsoleViewModel {
  blindLabel: string;
  status: string;
  stepLabel: string;
  tasks: TaskButtonModel[];
  historyRows: HistoryRowModel[];
  abilityChart: AbilitySeriesModel | null;
  canAct: boolean;
  showDebriefPrompt: boolean;
}

export interface TaskButtonModel {
  taskId: number; // 1-based
  label: string;
  skillBadges: string[];
  probability: number;
  probabilityLabel: string;
  disabled: boolean;
}

export interface HistoryRowModel {
  step: number;
  taskLabel: string;
  outcome: "success" | "failure";
}

export interface AbilitySeriesModel {
  /** One series per skill, values over steps 0..N. */
  series: { name: string; values: number[] }[];
}

export function buildViewModel(state: SessionState, inFlight: boolean): ConsoleViewModel {
  const active = state.status === "active";
  const canAct = active && !inFlight;
  const tasks: TaskButtonModel[] = [];
  for (let i = 0; i < state.num_tasks; i++) {
    const probability = state.predicted_probs[i];
    tasks.push({
      taskId: i + 1,
      label: `Task ${i + 1}`,
      skillBadges: state.skill_map[i].map((k) => `Skill ${k}`),
      probability,
      probabilityLabel: `${(probability * 100).toFixed(1)}%`,
      disabled: !canAct,
    });
  }
  const historyRows = state.history.map((row) => ({
    step: row.step,
    taskLabel: `Task ${row.task_id}`,
    outcome: row.success ? ("success" as const) : ("failure" as const),
  }));
  let abilityChart: AbilitySeriesModel | null = null;
  if (state.ability_estimates.available && state.ability_estimates.trace) {
    const trace = state.ability_estimates.trace;
    abilityChart = {
      series: Array.from({ length: state.num_skills }, (_, k) => ({
        name: `Skill ${k + 1}`,
        values: trace.map((row) => row[k]),
      })),
    };
  }
  return {
    blindLabel: state.blind_label,
    status: state.status,
    stepLabel: `${state.step} / ${state.max_steps}`,
    tasks,
    historyRows,
    abilityChart,
    canAct,
    showDebriefPrompt: state.status === "capped",
  };
}

export interface DebriefViewModel {
  modelFamily: string;
  steps: number;
  premature: boolean;
  headline: string;
  masteryLabel: string;
  trueAbilitySeries: AbilitySeriesModel;
}

export function buildDebriefViewModel(debrief: Debrief): DebriefViewModel {
  const masteryLabel =
    debrief.steps_to_true_mastery === null
      ? "never reached during the session"
      : `reached at step ${debrief.steps_to_true_mastery}`;
  const numSkills = debrief.true_ability_trace[0]?.length ?? 0;
  return {
    modelFamily: debrief.condition.toUpperCase(),
    steps: debrief.steps,
    premature: debrief.premature,
    headline: debrief.premature
      ? "Stopped before the student truly mastered both skills"
      : "The student had mastered both skills",
    masteryLabel,
    trueAbilitySeries: {
      series: Array.from({ length: numSkills }, (_, k) => ({
        name: `Skill ${k + 1} (true)`,
        values: debrief.true_ability_trace.map((row) => row[k]),
      })),
    },
  };
}
