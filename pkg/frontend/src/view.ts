import type { SessionState } from "./session.js";
import type { AgreementPayload } from "./types.js";
import { LEVEL_DEFINITIONS } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class View {
  readonly root: HTMLElement;
  private readonly frameImage: HTMLImageElement;
  private readonly frameCaption: HTMLElement;
  private readonly progressFill: HTMLElement;
  private readonly progressText: HTMLElement;
  private readonly inlineError: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly bannerText: HTMLElement;
  private readonly recentList: HTMLElement;
  private readonly agreementSection: HTMLElement;
  private readonly agreementBody: HTMLElement;

  constructor(root: HTMLElement, title: string, showAgreement: boolean) {
    this.root = root;
    root.replaceChildren();

    const header = el("header");
    header.append(el("h1", undefined, title));
    this.progressText = el("span", "progress-text", "0 / 0");
    const bar = el("div", "progress-bar");
    this.progressFill = el("div", "progress-fill");
    bar.append(this.progressFill);
    const progressWrap = el("div", "progress");
    progressWrap.append(bar, this.progressText);
    header.append(progressWrap);
    root.append(header);

    const stage = el("main", "stage");
    this.frameImage = el("img", "frame") as HTMLImageElement;
    this.frameImage.alt = "current frame";
    this.frameCaption = el("div", "caption");
    stage.append(this.frameImage, this.frameCaption);
    this.inlineError = el("div", "inline-error");
    this.inlineError.hidden = true;
    stage.append(this.inlineError);
    root.append(stage);

    const legend = el("aside", "legend");
    legend.append(el("h2", undefined, "Attention levels"));
    const list = el("ul");
    for (const level of LEVEL_DEFINITIONS) {
      list.append(el("li", undefined, `${level.key} (${level.name}): ${level.text}`));
    }
    legend.append(list);
    legend.append(
      el("p", "keys", "Keys: 0 / 1 / 2 submit the label and advance. u undoes your last label."),
    );
    this.recentList = el("ul", "recent");
    legend.append(el("h2", undefined, "Your recent labels"), this.recentList);
    root.append(legend);

    this.agreementSection = el("section", "agreement");
    this.agreementSection.hidden = !showAgreement;
    this.agreementSection.append(
      el("h2", undefined, "Agreement (review mode)"),
      el("p", "keys", "Press g to refresh."),
    );
    this.agreementBody = el("div", "agreement-body");
    this.agreementSection.append(this.agreementBody);
    root.append(this.agreementSection);

    this.banner = el("div", "banner");
    this.banner.hidden = true;
    this.bannerText = el("p");
    this.banner.append(this.bannerText, el("p", "keys", "Press any key to retry."));
    root.append(this.banner);
  }

  update(state: SessionState): void {
    if (state.task) {
      this.frameImage.src = state.task.image_url;
      this.frameImage.hidden = false;
      this.frameCaption.textContent = `${state.task.set_id} - frame ${state.task.frame_index}`;
    } else {
      this.frameImage.hidden = true;
      this.frameCaption.textContent = state.finished
        ? "All frames labeled. Thank you!"
        : "Loading...";
    }
    this.progressText.textContent = `${state.done} / ${state.total}`;
    const pct = state.total > 0 ? (100 * state.done) / state.total : 0;
    this.progressFill.style.width = `${pct.toFixed(1)}%`;

    this.recentList.replaceChildren(
      ...state.recent
        .slice()
        .reverse()
        .map((entry) =>
          el("li", undefined, `${entry.setId}/${entry.frameIndex} -> ${entry.label}`),
        ),
    );
  }

  showInlineError(message: string): void {
    this.inlineError.textContent = message;
    this.inlineError.hidden = false;
  }

  clearInlineError(): void {
    this.inlineError.hidden = true;
  }

  showBanner(message: string): void {
    this.bannerText.textContent = message;
    this.banner.hidden = false;
  }

  hideBanner(): void {
    this.banner.hidden = true;
  }

  get bannerVisible(): boolean {
    return !this.banner.hidden;
  }

  renderAgreement(payload: AgreementPayload): void {
    const body = this.agreementBody;
    body.replaceChildren();
    body.append(
      el(
        "p",
        undefined,
        `${payload.votes_logged} votes logged over ${payload.frames_total} frames`,
      ),
    );
    const report = payload.report;
    if (!report) {
      body.append(el("p", undefined, "No fully voted frames yet."));
      return;
    }
    const table = el("table");
    const head = el("tr");
    for (const cell of ["set", "frames", "% settled (annotators)", "% settled (with checker)"]) {
      head.append(el("th", undefined, cell));
    }
    table.append(head);
    for (const row of report.per_set) {
      const tr = el("tr");
      tr.append(
        el("td", undefined, row.set_id),
        el("td", undefined, String(row.frames)),
        el("td", undefined, row.pct_settled_annotators.toFixed(2)),
        el("td", undefined, row.pct_settled_with_checker.toFixed(2)),
      );
      table.append(tr);
    }
    const mean = el("tr", "summary");
    mean.append(
      el("td", undefined, "mean / std"),
      el("td", undefined, "-"),
      el(
        "td",
        undefined,
        `${report.mean_settled_annotators.toFixed(2)} / ${report.std_settled_annotators.toFixed(4)}`,
      ),
      el(
        "td",
        undefined,
        `${report.mean_settled_with_checker.toFixed(2)} / ${report.std_settled_with_checker.toFixed(4)}`,
      ),
    );
    table.append(mean);
    body.append(table);
    const dist = Object.entries(report.class_distribution)
      .map(([name, pct]) => `${name} ${pct.toFixed(1)}%`)
      .join("  ");
    body.append(el("p", undefined, `final label distribution: ${dist}`));
  }
}
