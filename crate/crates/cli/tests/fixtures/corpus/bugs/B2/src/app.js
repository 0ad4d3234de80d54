function report(list, s) {
  var m = mean(list);
  var n = count(s);
  return format(m, n);
}

function format(m, n) {
  return m + ':' + n;
}

var handlers = {
  run: function (x) {
    return report(x.list, x.text);
  }
};

function main(input) {
  var h = handlers[input.kind];
  return h(input);
}
