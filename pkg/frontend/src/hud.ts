/** Status banner and the numbers overlay. Thin DOM layer, no logic. */

import { SceneModel } from "./sceneModel.js";

export class Hud {
  private readonly banner: HTMLElement;
  private readonly stats: HTMLElement;
  private readonly toast: HTMLElement;
  private toastTimer: number | undefined;
  private lastErrorShown: string | null = null;

  constructor(root: Document = document) {
    this.banner = root.getElementById("banner")!;
    this.stats = root.getElementById("stats")!;
    this.toast = root.getElementById("toast")!;
  }

  update(m: SceneModel): void {
    const status = m.connection === "open"
      ? (m.controlOwned ? "connected, control owned (drag the marker; T releases)"
                        : "connected, observing (T takes control)")
      : m.connection === "connecting" ? "connecting..." : "disconnected, retrying...";
    this.banner.textContent = status;
    this.banner.className = m.connection === "open" ? "ok" : "down";

    const t = (m.lastStampMs / 1000).toFixed(2);
    this.stats.textContent =
      `t=${t}s  agents=${m.agents.size}  voxels=${m.voxels.size}` +
      (m.goal ? `  goal=(${m.goal.p.map((v) => v.toFixed(1)).join(", ")})` : "") +
      (m.path ? `  path=${m.path.primitives.length} segs` : "");

    if (m.denialReason) this.show(m.denialReason);
    if (m.lastError && m.lastError !== this.lastErrorShown) {
      this.show(m.lastError);
      this.lastErrorShown = m.lastError;
    }
  }

  show(message: string): void {
    this.toast.textContent = message;
    this.toast.classList.add("visible");
    clearTimeout(this.toastTimer);
    this.toastTimer = setTimeout(
      () => this.toast.classList.remove("visible"), 2500) as unknown as number;
  }
}
