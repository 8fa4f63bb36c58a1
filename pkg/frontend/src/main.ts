import { mountApp } from "./app.js";

function annotatorId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("annotator");
  if (fromQuery) return fromQuery;
  const typed = window.prompt("annotator id:");
  if (typed) {
    const url = new URL(window.location.href);
    url.searchParams.set("annotator", typed);
    window.history.replaceState(null, "", url);
    return typed;
  }
  return "anonymous";
}

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");
mountApp(root, annotatorId());
