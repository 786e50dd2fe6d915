import { ConflictError, ReviewApi } from "./api.js";
import {
  allTrueCriteria,
  type Criteria,
  type CriterionKey,
  type Decision,
  type QueueItem,
} from "./types.js";

export interface SessionState {
  queue: QueueItem[];
  current: QueueItem | null;
  frame: number;
  playing: boolean;
  criteria: Criteria;
  notice: string;
  done: number;
}

/** Review loop state: one pending track at a time, three frame-locked views,
 * checklist, decision submission, automatic advance. The UI layer renders
 * whatever this holds; all mutations go through the server. */
export class ReviewSession {
  state: SessionState = {
    queue: [],
    current: null,
    frame: 0,
    playing: false,
    criteria: allTrueCriteria(),
    notice: "",
    done: 0,
  };
  private listeners: Array<() => void> = [];

  constructor(
    private api: ReviewApi,
    private reviewer?: string,
  ) {}

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  async load(): Promise<void> {
    const resp = await this.api.queue();
    this.state.queue = resp.pending;
    this.state.current = resp.pending[0] ?? null;
    this.state.frame = 0;
    this.state.playing = false;
    this.state.criteria = allTrueCriteria();
    this.emit();
  }

  /** Media URLs for the three synchronized panes at the current frame. */
  mediaUrls(): { rgb: string; masked: string; keypoints: string } | null {
    const cur = this.state.current;
    if (!cur) return null;
    return {
      rgb: this.api.mediaUrl(cur.track_id, "rgb", this.state.frame),
      masked: this.api.mediaUrl(cur.track_id, "masked", this.state.frame),
      keypoints: this.api.mediaUrl(cur.track_id, "keypoints", this.state.frame),
    };
  }

  scrub(frame: number): void {
    const cur = this.state.current;
    if (!cur) return;
    this.state.frame = Math.min(Math.max(frame, 0), cur.n_frames - 1);
    this.emit();
  }

  step(delta: number): void {
    this.scrub(this.state.frame + delta);
  }

  togglePlay(): void {
    this.state.playing = !this.state.playing;
    this.emit();
  }

  /** Advance one frame while playing, wrapping at the end. */
  tick(): void {
    const cur = this.state.current;
    if (!cur || !this.state.playing) return;
    this.state.frame = (this.state.frame + 1) % cur.n_frames;
    this.emit();
  }

  toggleCriterion(key: CriterionKey): void {
    this.state.criteria[key] = !this.state.criteria[key];
    this.emit();
  }

  private advance(): void {
    this.state.queue = this.state.queue.filter(
      (q) => q.track_id !== this.state.current?.track_id,
    );
    this.state.current = this.state.queue[0] ?? null;
    this.state.frame = 0;
    this.state.playing = false;
    this.state.criteria = allTrueCriteria();
    this.emit();
  }

  skip(notice = ""): void {
    this.state.notice = notice;
    this.advance();
  }

  async submit(decision: Decision): Promise<void> {
    const cur = this.state.current;
    if (!cur) return;
    try {
      await this.api.decide(cur.track_id, {
        decision,
        criteria: { ...this.state.criteria },
        reviewer: this.reviewer,
      });
      this.state.done += 1;
      this.state.notice = `${cur.track_id}: ${decision}ed`;
    } catch (err) {
      if (err instanceof ConflictError) {
        this.state.notice = `${cur.track_id} was already decided elsewhere; skipped`;
      } else {
        this.state.notice = String(err);
        this.emit();
        return; // stay on the item so the reviewer can retry
      }
    }
    this.advance();
  }
}
