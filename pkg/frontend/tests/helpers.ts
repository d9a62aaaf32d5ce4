import type { Debrief, SessionState } from "../src/types";

export function makeState(overrides: Partial<SessionState> = {}): SessionState {
  return {
    session_id: "abc123",
    blind_label: "B",
    status: "active",
    step: 0,
    max_steps: 30,
    num_tasks: 4,
    num_skills: 2,
    skill_map: [[1], [2], [1, 2], [1, 2]],
    history: [],
    predicted_probs: [0.41, 0.38, 0.52, 0.27],
    ability_estimates: { available: true, trace: [[0.1, 0.2]] },
    ...overrides,
  };
}

export function makeDebrief(overrides: Partial<Debrief> = {}): Debrief {
  return {
    session_id: "abc123",
    blind_label: "B",
    condition: "pfa",
    status: "stopped",
    steps: 3,
    stop_reason: "human_stop",
    premature: true,
    steps_to_true_mastery: null,
    true_ability_trace: [
      [0, 0],
      [0.37, 0],
      [0.37, 0.37],
      [0.9, 0.8],
    ],
    ...overrides,
  };
}

export async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

export async function waitFor(
  predicate: () => boolean,
  timeoutMs = 5000,
  intervalMs = 20,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
  throw new Error("waitFor timed out");
}
