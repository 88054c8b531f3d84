/** Browser bootstrap: reads ?scape=<id>&mode=experience&service=<url>
 * from the query string and mounts the app. */

import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "";
const app = new App({
  baseUrl,
  experienceMode: params.get("mode") === "experience",
});

document.body.appendChild(app.element);

const scapeId = params.get("scape");
if (scapeId) {
  void app.load(scapeId);
}

// room drag-and-drop from the search panel's library list
app.room.element.addEventListener("dragover", (ev) => ev.preventDefault());
app.room.element.addEventListener("drop", (ev) => {
  ev.preventDefault();
  const assetId = ev.dataTransfer?.getData("text/x-asset-id");
  if (!assetId) return;
  const name = ev.dataTransfer?.getData("text/plain") || assetId;
  app.addSourceFromAsset(assetId, name);
});

declare global {
  interface Window {
    soundscapeApp: App;
  }
}
window.soundscapeApp = app; // dev-mode handle: inspect app.store.messageLog
