// Small DOM construction helpers; no framework, just elements.
export function el(tag, attrs = {}, ...children) {
    const node = document.createElement(tag);
    for (const [name, value] of Object.entries(attrs)) {
        if (typeof value === "function") {
            node.addEventListener(name.replace(/^on/, ""), value);
        }
        else if (typeof value === "boolean") {
            if (value)
                node.setAttribute(name, "");
        }
        else {
            node.setAttribute(name, value);
        }
    }
    append(node, ...children);
    return node;
}
export function append(node, ...children) {
    for (const child of children) {
        if (child === null || child === undefined)
            continue;
        node.appendChild(typeof child === "string" ? document.createTextNode(child) : child);
    }
}
export function clear(node) {
    while (node.firstChild) {
        node.removeChild(node.firstChild);
    }
}
export function text(node, value) {
    node.textContent = value;
}
