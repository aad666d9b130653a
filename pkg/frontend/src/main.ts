import { StudioApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8000";
const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");
const app = new StudioApp(root, baseUrl);
void app.start();

declare global {
  interface Window {
    studio: StudioApp;
  }
}
window.studio = app;
