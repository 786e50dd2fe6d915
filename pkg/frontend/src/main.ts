import { ReviewApi } from "./api.js";
import { mountReviewUi } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
mountReviewUi(document.getElementById("app")!, new ReviewApi(base));
