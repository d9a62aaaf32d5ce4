/** Payload shapes of the session service API (docs/api.md). */

export type SessionStatus = "active" | "stopped" | "capped";

export interface CreatedSession {
  session_id: string;
  blind_label: string;
}

export interface HistoryRow {
  step: number;
  task_id: number; // 1-based
  success: boolean;
  decision_ms: number | null;
}

export interface AbilityEstimates {
  available: boolean;
  /** One entry per step; each entry holds one value per skill. */
  trace: number[][] | null;
}

export interface SessionState {
  session_id: string;
  blind_label: string;
  status: SessionStatus;
  step: number;
  max_steps: number;
  num_tasks: number;
  num_skills: number;
  skill_map: number[][]; // 1-based skill ids per task
  history: HistoryRow[];
  predicted_probs: number[];
  ability_estimates: AbilityEstimates;
}

export interface AttemptResponse {
  success: boolean;
  state: SessionState;
}

export interface Debrief {
  session_id: string;
  blind_label: string;
  condition: string;
  status: SessionStatus;
  steps: number;
  stop_reason: string;
  premature: boolean;
  steps_to_true_mastery: number | null;
  true_ability_trace: number[][];
}
