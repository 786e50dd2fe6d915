import { ReviewApi } from "./api.js";
import { ReviewSession } from "./session.js";
import {
  CRITERIA_KEYS,
  CRITERIA_LABELS,
  MEDIA_KINDS,
  type CriterionKey,
} from "./types.js";

const PLAY_FPS = 10;

/** Wires the session to the DOM: three frame-locked panes, scrubber,
 * checklist, keyboard shortcuts, progress bar. */
export function mountReviewUi(
  root: HTMLElement,
  api: ReviewApi,
  doc: Document = document,
): ReviewSession {
  const session = new ReviewSession(api);
  root.innerHTML = `
    <header>
      <span id="track-label">loading…</span>
      <span id="progress"></span>
    </header>
    <section id="panes">
      ${MEDIA_KINDS.map(
        (k) => `<figure><img id="pane-${k}" alt="${k}"><figcaption>${k}</figcaption></figure>`,
      ).join("")}
    </section>
    <section id="transport">
      <button id="play">play</button>
      <input id="scrub" type="range" min="0" value="0" step="1">
      <span id="frame-label"></span>
    </section>
    <section id="criteria">
      ${CRITERIA_KEYS.map(
        (k, i) =>
          `<label><input type="checkbox" id="crit-${k}" checked> ${i + 1}. ${CRITERIA_LABELS[k]}</label>`,
      ).join("")}
    </section>
    <section id="actions">
      <button id="accept">accept (a)</button>
      <button id="reject">reject (r)</button>
      <button id="skip">skip (n)</button>
    </section>
    <footer id="notice"></footer>
  `;

  const el = <T extends HTMLElement>(id: string) =>
    root.querySelector<T>(`#${id}`)!;
  const panes = Object.fromEntries(
    MEDIA_KINDS.map((k) => [k, el<HTMLImageElement>(`pane-${k}`)]),
  );
  const scrub = el<HTMLInputElement>("scrub");

  function render() {
    const { current, frame, playing, criteria, notice, done, queue } =
      session.state;
    el("notice").textContent = notice;
    el("progress").textContent = `${done} done / ${queue.length} pending`;
    if (!current) {
      el("track-label").textContent = "queue drained";
      return;
    }
    el("track-label").textContent =
      `${current.track_id} (${current.category}, roughness ${current.temporal_roughness.toFixed(1)})`;
    const urls = session.mediaUrls()!;
    for (const kind of MEDIA_KINDS) {
      if (panes[kind].getAttribute("src") !== urls[kind])
        panes[kind].setAttribute("src", urls[kind]);
    }
    scrub.max = String(current.n_frames - 1);
    scrub.value = String(frame);
    el("frame-label").textContent = `${frame + 1}/${current.n_frames}`;
    el("play").textContent = playing ? "pause" : "play";
    for (const k of CRITERIA_KEYS) {
      el<HTMLInputElement>(`crit-${k}`).checked = criteria[k];
    }
  }
  session.onChange(render);

  el("play").addEventListener("click", () => session.togglePlay());
  el("accept").addEventListener("click", () => void session.submit("accept"));
  el("reject").addEventListener("click", () => void session.submit("reject"));
  el("skip").addEventListener("click", () => session.skip());
  scrub.addEventListener("input", () => session.scrub(Number(scrub.value)));
  for (const k of CRITERIA_KEYS) {
    el<HTMLInputElement>(`crit-${k}`).addEventListener("change", () =>
      session.toggleCriterion(k),
    );
  }

  doc.addEventListener("keydown", (ev: KeyboardEvent) => {
    const target = ev.target as HTMLElement | null;
    if (target && ["INPUT", "TEXTAREA"].includes(target.tagName) &&
        (target as HTMLInputElement).type !== "range") {
      return;
    }
    switch (ev.key) {
      case "a":
        void session.submit("accept");
        break;
      case "r":
        void session.submit("reject");
        break;
      case "n":
        session.skip();
        break;
      case " ":
        ev.preventDefault();
        session.togglePlay();
        break;
      case "ArrowRight":
        session.step(1);
        break;
      case "ArrowLeft":
        session.step(-1);
        break;
      default:
        if (/^[1-5]$/.test(ev.key)) {
          session.toggleCriterion(
            CRITERIA_KEYS[Number(ev.key) - 1] as CriterionKey,
          );
        }
    }
  });

  const timer = setInterval(() => session.tick(), 1000 / PLAY_FPS);
  root.addEventListener("review-ui-destroy", () => clearInterval(timer));

  void session.load();
  return session;
}
