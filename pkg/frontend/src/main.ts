/**
 * Browser entry point: mounts the session view and wires DOM events.
 *
 * Rendering is wholesale (state to HTML string to innerHTML), so all
 * listeners are delegated from the mount node and survive re-renders.
 * Input keystrokes update the state silently; full renders happen on
 * service responses and explicit actions.
 */

import { ServiceClient } from "./api.js";
import { SessionController } from "./controller.js";
import type { KeyValueStorage } from "./controller.js";
import { renderSession } from "./views.js";

function localStorageAdapter(): KeyValueStorage {
  return {
    get: (key) => window.localStorage.getItem(key),
    set: (key, value) => window.localStorage.setItem(key, value),
    remove: (key) => window.localStorage.removeItem(key),
  };
}

function mount(root: HTMLElement): void {
  const client = new ServiceClient("");
  const controller = new SessionController(
    client,
    (state) => {
      root.innerHTML = renderSession(state);
    },
    localStorageAdapter(),
  );

  root.addEventListener("submit", (event) => {
    const form = event.target;
    if (!(form instanceof HTMLFormElement)) return;
    event.preventDefault();
    if (form.dataset.form === "ask") {
      void controller.submitQuestion();
    } else if (form.dataset.form === "ingest") {
      void controller.startIngest();
    }
  });

  root.addEventListener("click", (event) => {
    const target = event.target;
    if (!(target instanceof HTMLElement)) return;
    const actor = target.closest<HTMLElement>("[data-action]");
    if (actor === null) return;
    const action = actor.dataset.action;
    if (action === "retry-ask") {
      void controller.retryAsk();
    } else if (action === "select-video" && actor.dataset.videoId) {
      void controller.selectVideo(actor.dataset.videoId);
    }
  });

  root.addEventListener("input", (event) => {
    const field = event.target;
    if (!(field instanceof HTMLInputElement) && !(field instanceof HTMLSelectElement)) return;
    switch (field.name) {
      case "question":
        controller.setInputs({ question: field.value });
        break;
      case "k": {
        const k = Number.parseInt(field.value, 10);
        if (Number.isFinite(k) && k >= 1) controller.setInputs({ k });
        break;
      }
      case "promptType":
        controller.setInputs(
          { promptType: field.value === "type2" ? "type2" : "type1" },
          { render: true },
        );
        break;
      case "framesDir":
        controller.setInputs({ framesDir: field.value });
        break;
      case "audioPath":
        controller.setInputs({ audioPath: field.value });
        break;
      case "videoId":
        controller.setInputs({ videoId: field.value });
        break;
    }
  });

  root.innerHTML = renderSession(controller.current());
  void controller.refreshVideos();
  controller.resume();
}

const root = document.getElementById("app");
if (root !== null) mount(root);
