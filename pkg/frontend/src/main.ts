import { ReviewApi } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
// Served by the review service under /ui; the API lives at the origin root.
const app = new App(new ReviewApi(""), root);
void app.start();
