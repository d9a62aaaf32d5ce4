import { SessionApi } from "./api";
import { TeachingConsole } from "./ui";

const params = new URLSearchParams(window.location.search);
const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const api = new SessionApi(params.get("api") ?? "");
const teachingConsole = new TeachingConsole(root, api);

const existing = params.get("session");
if (existing) {
  void teachingConsole.refresh(existing);
} else {
  void teachingConsole.start(params.get("condition") ?? undefined);
}
