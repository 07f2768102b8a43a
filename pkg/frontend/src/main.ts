import { ApiClient } from "./client.js";
import { EditorSession } from "./session.js";
import { mount } from "./render.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");

const client = new ApiClient("");
EditorSession.connect(client).then(
  (session) => mount(root, session),
  (err: unknown) => {
    root.textContent = "";
    const banner = document.createElement("div");
    banner.className = "banner";
    banner.textContent = `Could not load the document: ${String(err)}`;
    root.appendChild(banner);
  },
);
