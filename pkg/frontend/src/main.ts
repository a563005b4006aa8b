import { ApiError, Prediction } from "./api.js";
import { captureFrame, startCamera, stopCamera } from "./camera.js";
import { CaptureLoop } from "./loop.js";
import {
  SessionState,
  loadSettings,
  saveSettings,
  validateSettings,
} from "./settings.js";
import { speak, speechSupported, wordsForLabel } from "./speech.js";
import { StabilityGate } from "./stability.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const video = el<HTMLVideoElement>("camera");
const toggleBtn = el<HTMLButtonElement>("toggle");
const instructions = el<HTMLElement>("camera-instructions");
const connection = el<HTMLElement>("connection");
const announcement = el<HTMLElement>("announcement");
const topLabel = el<HTMLElement>("top-label");
const probFill = el<HTMLElement>("prob-fill");
const probBar = el<HTMLElement>("prob-bar");
const statusLine = el<HTMLElement>("status-line");

const urlInput = el<HTMLInputElement>("set-url");
const intervalInput = el<HTMLInputElement>("set-interval");
const windowInput = el<HTMLInputElement>("set-window");
const thresholdInput = el<HTMLInputElement>("set-threshold");
const saveBtn = el<HTMLButtonElement>("save-settings");
const saveNote = el<HTMLElement>("save-note");

// the state object is shared with the gate and the loop; mutate, never replace
const state = loadSettings(window.localStorage);
const gate = new StabilityGate(state);
let stream: MediaStream | null = null;

function fillForm(s: SessionState) {
  urlInput.value = s.serviceUrl;
  intervalInput.value = String(s.intervalMs);
  windowInput.value = String(s.windowN);
  thresholdInput.value = String(s.threshold);
}

function showFieldErrors(errors: Record<string, string>) {
  const fields: Record<string, string> = {
    serviceUrl: "err-url",
    intervalMs: "err-interval",
    windowN: "err-window",
    threshold: "err-threshold",
  };
  for (const [field, errId] of Object.entries(fields)) {
    el<HTMLElement>(errId).textContent = errors[field] ?? "";
  }
}

const loop = new CaptureLoop(
  state,
  gate,
  { grabFrame: () => captureFrame(video) },
  {
    onResult(top: Prediction, all: Prediction[], latencyMs: number) {
      topLabel.textContent = top.label;
      const pct = Math.round(top.probability * 1000) / 10;
      probFill.style.width = `${Math.min(100, pct)}%`;
      probBar.setAttribute("aria-valuenow", String(pct));
      statusLine.textContent =
        `${all.length} classes, top ${top.label} at ${pct}%, ` +
        `${latencyMs.toFixed(1)} ms`;
    },
    onAnnounce(label: string) {
      const words = wordsForLabel(label);
      announcement.textContent = words;
      speak(words);
    },
    onOffline() {
      connection.textContent = "service offline";
      connection.className = "badge offline";
      speak("service offline");
    },
    onOnline() {
      connection.textContent = "service online";
      connection.className = "badge online";
    },
    onError(err: ApiError) {
      statusLine.textContent = `service error: ${err.message}`;
    },
  },
);

async function startSession() {
  instructions.hidden = true;
  try {
    stream = await startCamera(video);
  } catch (err) {
    instructions.hidden = false;
    statusLine.textContent =
      err instanceof Error ? err.message : "camera unavailable";
    return;
  }
  loop.start();
  toggleBtn.textContent = "Stop";
  statusLine.textContent = "running";
}

function stopSession() {
  loop.stop();
  stopCamera(video, stream);
  stream = null;
  toggleBtn.textContent = "Start";
  statusLine.textContent = "stopped";
  connection.textContent = "";
  connection.className = "badge";
}

toggleBtn.addEventListener("click", () => {
  if (loop.running) stopSession();
  else void startSession();
});

saveBtn.addEventListener("click", () => {
  const candidate: SessionState = {
    serviceUrl: urlInput.value.trim(),
    intervalMs: Number(intervalInput.value),
    windowN: Number(windowInput.value),
    threshold: Number(thresholdInput.value),
    lastSpoken: state.lastSpoken,
  };
  const errors = validateSettings(candidate);
  showFieldErrors(errors);
  if (Object.keys(errors).length > 0) {
    saveNote.textContent = "not saved, fix the highlighted fields";
    return;
  }
  state.serviceUrl = candidate.serviceUrl;
  state.intervalMs = candidate.intervalMs;
  state.windowN = candidate.windowN;
  state.threshold = candidate.threshold;
  saveSettings(window.localStorage, state);
  saveNote.textContent = "saved";
});

fillForm(state);
showFieldErrors({});
if (!speechSupported()) {
  statusLine.textContent =
    "speech synthesis is not available in this browser; announcements will be visual only";
}
