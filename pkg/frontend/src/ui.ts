import { SessionApi, ApiError } from "./api";
import { renderLineChart } from "./chart";
import { DecisionTimer } from "./timer";
import type { Debrief, SessionState } from "./types";
import {
  buildDebriefViewModel,
  buildViewModel,
  type ConsoleViewModel,
} from "./viewmodel";

interface ConsoleOptions {
  /** Dashed threshold drawn on the debrief chart (ability units). */
  masteryThreshold?: number;
  timer?: DecisionTimer;
}

/**
 * The teaching console. All rendering is a pure function of the latest
 * server response plus {inFlight, error}; events mutate nothing except
 * through the API round-trip.
 */
export class TeachingConsole {
  private state: SessionState | null = null;
  private debrief: Debrief | null = null;
  private inFlight = false;
  private error: string | null = null;
  private readonly timer: DecisionTimer;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: SessionApi,
    private readonly options: ConsoleOptions = {},
  ) {
    this.timer = options.timer ?? new DecisionTimer();
  }

  get sessionId(): string | null {
    return this.state?.session_id ?? null;
  }

  async start(condition?: string): Promise<void> {
    const created = await this.guarded(() => this.api.createSession(condition));
    if (created) await this.refresh(created.session_id);
  }

  /** Reload from GET; a hard refresh mid-session reconstructs the view. */
  async refresh(sessionId: string): Promise<void> {
    const state = await this.guarded(() => this.api.getState(sessionId));
    if (state) {
      this.state = state;
      this.render();
    }
  }

  async chooseTask(taskId: number): Promise<void> {
    if (!this.state || this.inFlight || this.state.status !== "active") return;
    const decisionMs = this.timer.read();
    const response = await this.guarded(() =>
      this.api.postAttempt(this.state!.session_id, taskId, decisionMs),
    );
    if (response) {
      this.state = response.state;
      this.render();
    } else if (this.error === null) {
      this.render();
    }
  }

  async stop(): Promise<void> {
    if (!this.state || this.inFlight) return;
    const debrief = await this.guarded(() => this.api.stopSession(this.state!.session_id));
    if (debrief) {
      this.debrief = debrief;
      if (this.state) this.state.status = debrief.status;
      this.render();
    }
  }

  /** Single-flight wrapper: disables the UI, catches transport errors. */
  private async guarded<T>(call: () => Promise<T>): Promise<T | null> {
    if (this.inFlight) return null;
    this.inFlight = true;
    this.error = null;
    this.render();
    try {
      return await call();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409 && this.state) {
        // someone else finished the session; re-sync instead of failing
        this.error = `session is no longer active (${err.message})`;
      } else {
        this.error = err instanceof Error ? err.message : String(err);
      }
      return null;
    } finally {
      this.inFlight = false;
      this.render();
    }
  }

  render(): void {
    this.root.textContent = "";
    if (this.error) {
      const banner = el("div", "error-banner");
      banner.textContent = `Connection problem: ${this.error}`;
      const retry = el("button", "retry-button") as HTMLButtonElement;
      retry.textContent = "Retry";
      retry.addEventListener("click", () => {
        if (this.state) void this.refresh(this.state.session_id);
      });
      banner.appendChild(retry);
      this.root.appendChild(banner);
    }
    if (this.debrief) {
      this.renderDebrief(this.debrief);
      return;
    }
    if (!this.state) {
      const note = el("p", "placeholder");
      note.textContent = this.inFlight ? "Starting session…" : "No session.";
      this.root.appendChild(note);
      return;
    }
    this.renderConsole(buildViewModel(this.state, this.inFlight));
    this.timer.markRendered();
  }

  private renderConsole(vm: ConsoleViewModel): void {
    const header = el("header", "console-header");
    header.textContent = `Student ${vm.blindLabel} — step ${vm.stepLabel} (${vm.status})`;
    this.root.appendChild(header);

    const taskPanel = el("section", "task-panel");
    for (const task of vm.tasks) {
      const button = el("button", "task-button") as HTMLButtonElement;
      button.dataset.taskId = String(task.taskId);
      button.disabled = task.disabled;
      const name = el("span", "task-name");
      name.textContent = task.label;
      button.appendChild(name);
      for (const badge of task.skillBadges) {
        const chip = el("span", "skill-badge");
        chip.textContent = badge;
        button.appendChild(chip);
      }
      const prob = el("span", "task-probability");
      prob.textContent = task.probabilityLabel;
      button.appendChild(prob);
      button.addEventListener("click", () => void this.chooseTask(task.taskId));
      taskPanel.appendChild(button);
    }
    this.root.appendChild(taskPanel);

    const history = el("table", "history-table");
    const head = el("tr");
    for (const title of ["Step", "Task", "Outcome"]) {
      const th = el("th");
      th.textContent = title;
      head.appendChild(th);
    }
    history.appendChild(head);
    for (const row of vm.historyRows) {
      const tr = el("tr", `history-row ${row.outcome}`);
      for (const text of [String(row.step), row.taskLabel, row.outcome]) {
        const td = el("td");
        td.textContent = text;
        tr.appendChild(td);
      }
      history.appendChild(tr);
    }
    this.root.appendChild(history);

    const chartRegion = el("section", "chart-region");
    if (vm.abilityChart) {
      chartRegion.appendChild(renderLineChart(vm.abilityChart));
    } else {
      const note = el("p", "no-ability-note");
      note.textContent = "No ability estimate available for this student model.";
      chartRegion.appendChild(note);
    }
    this.root.appendChild(chartRegion);

    const footer = el("footer", "console-footer");
    if (vm.showDebriefPrompt) {
      const prompt = el("p", "debrief-prompt");
      prompt.textContent = "The session hit the step cap. Stop to see the debrief.";
      footer.appendChild(prompt);
    }
    const stopButton = el("button", "stop-button") as HTMLButtonElement;
    stopButton.textContent = "Stop teaching";
    stopButton.disabled = this.inFlight || this.state?.status === "stopped";
    stopButton.addEventListener("click", () => void this.stop());
    footer.appendChild(stopButton);
    this.root.appendChild(footer);
  }

  private renderDebrief(debrief: Debrief): void {
    const vm = buildDebriefViewModel(debrief);
    const panel = el("section", "debrief-panel");
    const title = el("h2", "debrief-title");
    title.textContent = `Model: ${vm.modelFamily}`;
    panel.appendChild(title);

    const headline = el("p", vm.premature ? "debrief-premature" : "debrief-mastered");
    headline.textContent = vm.headline;
    panel.appendChild(headline);

    const facts = el("p", "debrief-facts");
    facts.textContent = `Steps taken: ${vm.steps}. True mastery ${vm.masteryLabel}.`;
    panel.appendChild(facts);

    panel.appendChild(
      renderLineChart(vm.trueAbilitySeries, 420, 220, this.options.masteryThreshold ?? 1.5),
    );
    this.root.appendChild(panel);
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}
